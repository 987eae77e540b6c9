#![allow(dead_code)]

use saasr::diarize::{recognize_segments, segment_features, AttributedUtterance, DiarizeConfig, SegmentRecognition};
use saasr::layout::STACK;
use saasr::metrics::{min_cost_assignment, words, SpeakerTranscripts};
use saasr::model::constructed::{pointer_model, PointerGains};
use saasr::model::Model;
use saasr::simgen::SyntheticSession;

pub fn reader(s: &SyntheticSession) -> Model {
    pointer_model(&s.layout, s.vocabulary.eos(), s.vocabulary.sc(), &PointerGains::default()).unwrap()
}

pub fn reference(s: &SyntheticSession) -> SpeakerTranscripts {
    let mut out = SpeakerTranscripts::new();
    for r in &s.references {
        out.entry(r.speaker_id.clone()).or_default().push(words(&s.vocabulary.to_text(&r.tokens)));
    }
    out
}

/// Segments decoded against the session's example profiles.
pub fn decode_with_examples(s: &SyntheticSession, config: &DiarizeConfig) -> Vec<SegmentRecognition> {
    let model = reader(s);
    let segs = segment_features(&s.features, s.layout.energy(), &config.vad, STACK).unwrap();
    recognize_segments(&model, &segs, &s.example_inventory().unwrap(), s.vocabulary.specials(), &config.beam, config.margin, &[], config.execution).unwrap()
}

/// Reference speaker of a decoded utterance: the reference with the same
/// tokens that overlaps it most.
fn true_speaker<'a>(s: &'a SyntheticSession, u: &AttributedUtterance) -> Option<&'a str> {
    s.references
        .iter()
        .filter(|r| r.tokens == u.tokens)
        .map(|r| (r, (r.end.min(u.end) - r.start.max(u.start)).max(0.0)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, _)| r.speaker_id.as_str())
}

/// Fraction of utterances whose cluster maps to their true speaker under the
/// best one-to-one relabeling. Utterances matching no reference count as wrong.
pub fn label_accuracy(s: &SyntheticSession, us: &[AttributedUtterance]) -> f64 {
    if us.is_empty() {
        return 0.0;
    }
    let truth = s.speaker_ids();
    let mut labels: Vec<&str> = us.iter().map(|u| u.speaker_label.as_str()).collect();
    labels.sort();
    labels.dedup();
    let mut table = vec![vec![0.0; truth.len()]; labels.len()];
    for u in us {
        if let Some(t) = true_speaker(s, u) {
            let i = labels.iter().position(|l| *l == u.speaker_label).unwrap();
            let j = truth.iter().position(|x| x == t).unwrap();
            table[i][j] -= 1.0;
        }
    }
    let assignment = min_cost_assignment(&table);
    let correct: f64 = assignment.iter().enumerate().filter_map(|(i, j)| j.map(|j| -table[i][j])).sum();
    correct / us.len() as f64
}
