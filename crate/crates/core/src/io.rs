//! JSON file formats shared by the command-line tools.
//!
//! Every file is an object with `schema_version` and `kind`. Kinds:
//!
//! - `session`: a synthetic session (features, references, profiles, vocabulary, generator config)
//! - `transcript`: speaker label to a list of `{start, end, text}`
//! - `report`: per-session scores plus an optional per-preset breakdown
//! - `labels`: a serialized training target

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diarize::AttributedUtterance;
use crate::error::{bail, Error, Result};
use crate::labels::{ReferenceUtterance, Scheme};
use crate::layout::FeatureLayout;
use crate::linalg::Matrix;
use crate::metrics::{cpwer, der, mean_speaker_count_error, speaker_count_error, words, DerReport, SpeakerTranscripts, TimedSpeech};
use crate::model::{FeatureSequence, SpeakerInventory, SpeakerProfile, TokenId, Vocabulary};
use crate::simgen::{Preset, SessionKind, SyntheticSession};

pub const SCHEMA_VERSION: u32 = 1;

fn check_header(kind: &str, expected: &str, version: u32) -> Result<()> {
    if kind != expected {
        bail!(Schema, "expected a {expected} file, got kind {kind:?}");
    }
    if version != SCHEMA_VERSION {
        bail!(Schema, "unsupported {expected} schema version {version}");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", content = "data", rename_all = "snake_case")]
pub enum FrameData {
    /// Little-endian `f32` values, row-major.
    F32Base64(String),
    Array(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBlock {
    pub rows: usize,
    pub cols: usize,
    pub frame_shift: f64,
    pub frames: FrameData,
}

impl FeatureBlock {
    /// With `base64` the values are stored as `f32`; anything not exactly
    /// representable is rounded.
    pub fn new(x: &FeatureSequence, base64: bool) -> Self {
        let m = x.frames();
        let frames = if base64 {
            let bytes: Vec<u8> = m.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
            FrameData::F32Base64(STANDARD.encode(bytes))
        } else {
            FrameData::Array(m.as_slice().to_vec())
        };
        Self { rows: m.rows(), cols: m.cols(), frame_shift: x.frame_shift(), frames }
    }

    pub fn to_sequence(&self) -> Result<FeatureSequence> {
        let values: Vec<f64> = match &self.frames {
            FrameData::Array(v) => v.clone(),
            FrameData::F32Base64(s) => {
                let bytes = STANDARD.decode(s).map_err(|e| Error::Schema(format!("bad base64 features: {e}")))?;
                if bytes.len() % 4 != 0 {
                    bail!(Schema, "base64 feature length {} is not a multiple of 4", bytes.len());
                }
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64).collect()
            }
        };
        if values.len() != self.rows * self.cols {
            bail!(Schema, "feature block {}x{} holds {} values", self.rows, self.cols, values.len());
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Schema, "features contain non-finite values");
        }
        FeatureSequence::new(Matrix::from_vec(self.rows, self.cols, values)?, self.frame_shift).map_err(|e| Error::Schema(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyRecord {
    pub sc: String,
    pub eos: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_boundary: Option<String>,
    pub tokens: Vec<String>,
}

impl VocabularyRecord {
    pub fn new(v: &Vocabulary) -> Self {
        let t = |id| v.token(id).expect("reserved symbol in vocabulary").to_owned();
        Self { sc: t(v.sc()), eos: t(v.eos()), word_boundary: v.word_boundary().map(str::to_owned), tokens: v.tokens().to_vec() }
    }

    pub fn to_vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::new(self.tokens.clone(), &self.sc, &self.eos, self.word_boundary.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub speaker_id: String,
    pub start: f64,
    pub end: f64,
    pub tokens: Vec<TokenId>,
    /// Detokenized; informational only.
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub session: SessionKind,
    /// Generator configuration that produced the session.
    #[serde(default)]
    pub config: serde_json::Value,
    pub layout: FeatureLayout,
    pub vocabulary: VocabularyRecord,
    pub features: FeatureBlock,
    pub references: Vec<ReferenceRecord>,
    pub relevant_profiles: Vec<SpeakerProfile>,
    #[serde(default)]
    pub irrelevant_profiles: Vec<SpeakerProfile>,
}

impl SessionFile {
    pub fn new<C: Serialize>(s: &SyntheticSession, config: &C, base64: bool) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind: "session".into(),
            seed: s.seed,
            session: s.kind,
            config: serde_json::to_value(config)?,
            layout: s.layout,
            vocabulary: VocabularyRecord::new(&s.vocabulary),
            features: FeatureBlock::new(&s.features, base64),
            references: s
                .references
                .iter()
                .map(|r| ReferenceRecord { speaker_id: r.speaker_id.clone(), start: r.start, end: r.end, tokens: r.tokens.clone(), text: s.vocabulary.to_text(&r.tokens) })
                .collect(),
            relevant_profiles: s.relevant_profiles.profiles().to_vec(),
            irrelevant_profiles: s.irrelevant_profiles.clone(),
        })
    }

    pub fn into_session(self) -> Result<SyntheticSession> {
        check_header(&self.kind, "session", self.schema_version)?;
        let vocabulary = self.vocabulary.to_vocabulary().map_err(|e| Error::Schema(e.to_string()))?;
        let features = self.features.to_sequence()?;
        if features.dim() != self.layout.feat_dim() {
            bail!(Schema, "features have {} channels, layout expects {}", features.dim(), self.layout.feat_dim());
        }
        if vocabulary.len() != self.layout.vocab_size {
            bail!(Schema, "vocabulary has {} tokens, layout expects {}", vocabulary.len(), self.layout.vocab_size);
        }
        let references = self
            .references
            .into_iter()
            .map(|r| {
                if let Some(t) = r.tokens.iter().find(|&&t| t >= vocabulary.len()) {
                    bail!(Schema, "reference of {} uses token {t} outside the vocabulary", r.speaker_id);
                }
                ReferenceUtterance::new(r.speaker_id, r.start, r.end, r.tokens).map_err(|e| Error::Schema(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let relevant_profiles = SpeakerInventory::new(self.relevant_profiles).map_err(|e| Error::Schema(e.to_string()))?;
        Ok(SyntheticSession {
            kind: self.session,
            seed: self.seed,
            layout: self.layout,
            vocabulary,
            features,
            references,
            relevant_profiles,
            irrelevant_profiles: self.irrelevant_profiles,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedText {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptFile {
    pub schema_version: u32,
    pub kind: String,
    /// Session the transcript belongs to, when known; drives the preset breakdown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionKind>,
    pub speakers: BTreeMap<String, Vec<TimedText>>,
}

impl TranscriptFile {
    pub fn new(session: Option<SessionKind>, mut speakers: BTreeMap<String, Vec<TimedText>>) -> Self {
        for us in speakers.values_mut() {
            us.sort_by(|a, b| a.start.unwrap_or(0.0).total_cmp(&b.start.unwrap_or(0.0)));
        }
        Self { schema_version: SCHEMA_VERSION, kind: "transcript".into(), session, speakers }
    }

    pub fn from_references(session: Option<SessionKind>, refs: &[ReferenceUtterance], vocab: &Vocabulary) -> Self {
        let mut speakers: BTreeMap<String, Vec<TimedText>> = BTreeMap::new();
        for r in refs {
            speakers.entry(r.speaker_id.clone()).or_default().push(TimedText { start: Some(r.start), end: Some(r.end), text: vocab.to_text(&r.tokens) });
        }
        Self::new(session, speakers)
    }

    pub fn from_utterances(session: Option<SessionKind>, us: &[AttributedUtterance], vocab: &Vocabulary) -> Self {
        let mut speakers: BTreeMap<String, Vec<TimedText>> = BTreeMap::new();
        for u in us {
            speakers.entry(u.speaker_label.clone()).or_default().push(TimedText { start: Some(u.start), end: Some(u.end), text: vocab.to_text(&u.tokens) });
        }
        Self::new(session, speakers)
    }

    pub fn check(&self) -> Result<()> {
        check_header(&self.kind, "transcript", self.schema_version)
    }

    pub fn word_sequences(&self) -> SpeakerTranscripts {
        self.speakers.iter().map(|(k, us)| (k.clone(), us.iter().map(|u| words(&u.text)).collect())).collect()
    }

    /// `None` if any utterance lacks a time.
    pub fn timed_speech(&self) -> Result<Option<Vec<TimedSpeech>>> {
        let mut out = Vec::with_capacity(self.speakers.len());
        for (k, us) in &self.speakers {
            let mut intervals = Vec::with_capacity(us.len());
            for u in us {
                let (Some(s), Some(e)) = (u.start, u.end) else { return Ok(None) };
                intervals.push((s, e));
            }
            out.push(TimedSpeech::new(k.clone(), intervals).map_err(|e| Error::Schema(e.to_string()))?);
        }
        Ok(Some(out))
    }

    /// Speakers with at least one utterance.
    pub fn speaker_count(&self) -> usize {
        self.speakers.values().filter(|us| !us.is_empty()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerRecord {
    pub der: f64,
    pub miss: f64,
    pub fa: f64,
    pub spk: f64,
    pub reference_time: f64,
}

impl From<DerReport> for DerRecord {
    fn from(r: DerReport) -> Self {
        Self { der: r.der, miss: r.miss, fa: r.false_alarm, spk: r.speaker_error, reference_time: r.reference_time }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub cpwer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
    /// Hypothesis speaker to reference speaker.
    pub mapping: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub der: Option<DerRecord>,
    pub speaker_count_error: f64,
    pub estimated_speakers: usize,
    pub reference_speakers: usize,
}

/// Scores `hyp` against `reference`. DER is reported when both sides carry times.
pub fn score_transcripts(name: &str, reference: &TranscriptFile, hyp: &TranscriptFile, resolution: f64) -> Result<SessionScore> {
    let c = cpwer(&reference.word_sequences(), &hyp.word_sequences())?;
    let der = match (reference.timed_speech()?, hyp.timed_speech()?) {
        (Some(r), Some(h)) => Some(der(&r, &h, resolution)?.into()),
        _ => None,
    };
    let (estimated_speakers, reference_speakers) = (hyp.speaker_count(), reference.speaker_count());
    Ok(SessionScore {
        name: name.to_owned(),
        preset: match reference.session.or(hyp.session) {
            Some(SessionKind::Meeting { preset }) => Some(preset),
            _ => None,
        },
        cpwer: c.wer,
        substitutions: c.substitutions,
        insertions: c.insertions,
        deletions: c.deletions,
        reference_words: c.reference_words,
        mapping: c.mapping,
        der,
        speaker_count_error: speaker_count_error(estimated_speakers, reference_speakers),
        estimated_speakers,
        reference_speakers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Preset name or `Avg.`.
    pub label: String,
    pub sessions: usize,
    /// Total errors over total reference words.
    pub cpwer: f64,
    /// Weighted by reference speech time; absent if any session lacks DER.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub der: Option<DerRecord>,
    pub speaker_count_error: f64,
}

fn aggregate(label: &str, scores: &[&SessionScore]) -> Option<Aggregate> {
    if scores.is_empty() {
        return None;
    }
    let errors: usize = scores.iter().map(|s| s.substitutions + s.insertions + s.deletions).sum();
    let total_words: usize = scores.iter().map(|s| s.reference_words).sum();
    let der = scores.iter().map(|s| s.der).collect::<Option<Vec<DerRecord>>>().map(|ds| {
        let time: f64 = ds.iter().map(|d| d.reference_time).sum();
        let w = |f: fn(&DerRecord) -> f64| ds.iter().map(|d| f(d) * d.reference_time).sum::<f64>() / time;
        DerRecord { der: w(|d| d.der), miss: w(|d| d.miss), fa: w(|d| d.fa), spk: w(|d| d.spk), reference_time: time }
    });
    let pairs: Vec<(usize, usize)> = scores.iter().map(|s| (s.estimated_speakers, s.reference_speakers)).collect();
    Some(Aggregate {
        label: label.to_owned(),
        sessions: scores.len(),
        cpwer: errors as f64 / total_words as f64,
        der,
        speaker_count_error: mean_speaker_count_error(&pairs).expect("non-empty"),
    })
}

/// One row per preset present, in 0S, 0L, 10 .. 40 order, then `Avg.` over all sessions.
pub fn preset_breakdown(scores: &[SessionScore]) -> Vec<Aggregate> {
    let mut rows: Vec<Aggregate> = Preset::ALL
        .iter()
        .filter_map(|p| aggregate(&p.to_string(), &scores.iter().filter(|s| s.preset == Some(*p)).collect::<Vec<_>>()))
        .collect();
    rows.extend(aggregate("Avg.", &scores.iter().collect::<Vec<_>>()));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub kind: String,
    pub sessions: Vec<SessionScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakdown: Vec<Aggregate>,
}

impl ReportFile {
    pub fn new(sessions: Vec<SessionScore>, breakdown: bool) -> Self {
        let breakdown = if breakdown { preset_breakdown(&sessions) } else { Vec::new() };
        Self { schema_version: SCHEMA_VERSION, kind: "report".into(), sessions, breakdown }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub schema_version: u32,
    pub kind: String,
    pub scheme: Scheme,
    pub tokens: Vec<TokenId>,
    /// The same sequence as token strings, reserved symbols included.
    pub symbols: Vec<String>,
}

impl LabelsFile {
    pub fn new(scheme: Scheme, tokens: Vec<TokenId>, vocab: &Vocabulary) -> Self {
        let symbols = tokens.iter().map(|&t| vocab.token(t).unwrap_or("<unk>").to_owned()).collect();
        Self { schema_version: SCHEMA_VERSION, kind: "labels".into(), scheme, tokens, symbols }
    }
}

/// The `kind` field of a JSON file, without parsing the rest.
pub fn peek_kind(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Header {
        kind: String,
    }
    let h: Header = serde_json::from_str(text).map_err(|e| Error::Schema(format!("not a schema file: {e}")))?;
    Ok(h.kind)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate_meeting, MeetingConfig};

    #[test]
    fn session_round_trips_both_encodings() {
        let cfg = MeetingConfig::default();
        let s = generate_meeting(3, &cfg).unwrap();
        for b64 in [true, false] {
            let file = SessionFile::new(&s, &cfg, b64).unwrap();
            let text = serde_json::to_string(&file).unwrap();
            let back: SessionFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.into_session().unwrap(), s);
        }
    }

    #[test]
    fn rejects_wrong_kind_and_version() {
        let s = generate_meeting(4, &MeetingConfig::default()).unwrap();
        let mut file = SessionFile::new(&s, &(), true).unwrap();
        file.kind = "report".into();
        assert!(matches!(file.clone().into_session(), Err(Error::Schema(_))));
        file.kind = "session".into();
        file.schema_version = 99;
        assert!(matches!(file.into_session(), Err(Error::Schema(_))));
        assert_eq!(peek_kind(r#"{"kind":"labels","x":1}"#).unwrap(), "labels");
        assert!(peek_kind("[]").is_err());
    }

    #[test]
    fn feature_block_length_checked() {
        let block = FeatureBlock { rows: 2, cols: 2, frame_shift: 0.01, frames: FrameData::Array(vec![1.0; 3]) };
        assert!(block.to_sequence().is_err());
        let block = FeatureBlock { rows: 1, cols: 1, frame_shift: 0.01, frames: FrameData::F32Base64("AAA".into()) };
        assert!(block.to_sequence().is_err());
    }

    fn transcript(entries: &[(&str, f64, f64, &str)]) -> TranscriptFile {
        let mut speakers: BTreeMap<String, Vec<TimedText>> = BTreeMap::new();
        for &(k, s, e, t) in entries {
            speakers.entry(k.into()).or_default().push(TimedText { start: Some(s), end: Some(e), text: t.into() });
        }
        TranscriptFile::new(Some(SessionKind::Meeting { preset: Preset::Overlap(10) }), speakers)
    }

    #[test]
    fn identical_transcripts_score_zero() {
        let r = transcript(&[("a", 0.0, 1.0, "hello world"), ("b", 0.5, 2.0, "good morning")]);
        let s = score_transcripts("x", &r, &r, 0.01).unwrap();
        assert_eq!(s.cpwer, 0.0);
        assert_eq!(s.der.unwrap().der, 0.0);
        assert_eq!(s.speaker_count_error, 0.0);
        assert_eq!(s.preset, Some(Preset::Overlap(10)));
    }

    #[test]
    fn untimed_hypothesis_skips_der() {
        let r = transcript(&[("a", 0.0, 1.0, "hello world")]);
        let mut h = r.clone();
        h.speakers.get_mut("a").unwrap()[0].start = None;
        assert!(score_transcripts("x", &r, &h, 0.01).unwrap().der.is_none());
    }

    #[test]
    fn breakdown_pools_words_and_time() {
        let r = transcript(&[("a", 0.0, 1.0, "a b c d")]);
        let h1 = transcript(&[("a", 0.0, 1.0, "a b c x")]);
        let mut s1 = score_transcripts("1", &r, &h1, 0.01).unwrap();
        let r2 = transcript(&[("a", 0.0, 3.0, "a b")]);
        let mut s2 = score_transcripts("2", &r2, &r2, 0.01).unwrap();
        s2.preset = Some(Preset::ShortSilence);
        s1.estimated_speakers = 3;
        s1.speaker_count_error = 2.0;
        let rows = preset_breakdown(&[s1, s2]);
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["0S", "10", "Avg."]);
        let avg = rows.last().unwrap();
        assert!((avg.cpwer - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(avg.speaker_count_error, 1.0);
        assert!((avg.der.unwrap().reference_time - 4.0).abs() < 1e-9);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_json(&p, &vec![1, 2]).unwrap();
        write_json(&p, &vec![3]).unwrap();
        assert_eq!(read_json::<Vec<i32>>(&p).unwrap(), vec![3]);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
