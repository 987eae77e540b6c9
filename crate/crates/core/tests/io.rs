use saasr::io::{read_json, score_transcripts, write_json, SessionFile, TranscriptFile};
use saasr::simgen::{generate_meeting, MeetingConfig, Preset};

#[test]
fn session_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = MeetingConfig { preset: Preset::Overlap(30), ..Default::default() };
    let s = generate_meeting(4, &cfg).unwrap();
    for base64 in [true, false] {
        let path = dir.path().join(format!("s{base64}.json"));
        write_json(&path, &SessionFile::new(&s, &cfg, base64).unwrap()).unwrap();
        let back = read_json::<SessionFile>(&path).unwrap().into_session().unwrap();
        assert_eq!(back, s);
    }
}

#[test]
fn reference_transcript_scores_perfectly() {
    let s = generate_meeting(8, &MeetingConfig::default()).unwrap();
    let t = TranscriptFile::from_references(Some(s.kind), &s.references, &s.vocabulary);
    let score = score_transcripts("m", &t, &t, 0.01).unwrap();
    assert_eq!(score.cpwer, 0.0);
    assert_eq!(score.der.map(|d| d.der), Some(0.0));
    assert_eq!(score.speaker_count_error, 0.0);
}
