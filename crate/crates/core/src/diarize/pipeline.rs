//! Session-level recognition: silence segmentation, per-segment decoding,
//! then either profile attribution or counting and clustering of the
//! utterance embeddings pooled over the whole session.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::affinity::{build_affinity, AffinityMatrix};
use super::nme::{nme_search, NmeOutcome};
use super::spectral::{spectral_cluster, ClusterResult};
use super::vad::{cut_segments, segment_silence, Segment, VadConfig};
use crate::decoder::{beam_search, merge_same_speaker, split_utterances, BeamConfig, ExternalScorer, Hypothesis, UtteranceHypothesis};
use crate::error::{bail, Error, Result};
use crate::exec::{self, Execution};
use crate::metrics::{estimate_boundaries, SpeakerTranscripts, TimedSpeech};
use crate::model::{FeatureSequence, Model, SpeakerInventory, Specials, TokenId, Vocabulary};

/// Which per-utterance vector is clustered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    /// Speaker query at the utterance's closing step.
    #[default]
    Query,
    /// β-weighted profile at the same step.
    WeightedProfile,
}

impl FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query" => Ok(Self::Query),
            "weighted_profile" | "weighted-profile" => Ok(Self::WeightedProfile),
            _ => Err(Error::Config(format!("unknown embedding `{s}` (expected query or weighted_profile)"))),
        }
    }
}

/// How the number of speakers is decided. Written `nme` or `oracle:K`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Counting {
    #[default]
    Nme,
    Oracle(usize),
}

impl FromStr for Counting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "nme" {
            return Ok(Self::Nme);
        }
        match s.strip_prefix("oracle:").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => Ok(Self::Oracle(k)),
            _ => Err(Error::Config(format!("unknown counting mode `{s}` (expected nme or oracle:K with K >= 1)"))),
        }
    }
}

impl TryFrom<String> for Counting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Counting> for String {
    fn from(c: Counting) -> Self {
        c.to_string()
    }
}

impl fmt::Display for Counting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Nme => f.write_str("nme"),
            Self::Oracle(k) => write!(f, "oracle:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiarizeConfig {
    pub embedding: Embedding,
    pub counting: Counting,
    pub max_speakers: usize,
    pub vad: VadConfig,
    pub beam: BeamConfig,
    /// Margin added around attention-estimated utterance times, seconds.
    pub margin: f64,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            embedding: Embedding::Query,
            counting: Counting::Nme,
            max_speakers: 8,
            vad: VadConfig::default(),
            beam: BeamConfig::default(),
            margin: 0.5,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl DiarizeConfig {
    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        if self.max_speakers == 0 {
            bail!(Config, "max_speakers must be at least 1");
        }
        if !(self.margin >= 0.0) {
            bail!(Config, "margin must be non-negative");
        }
        if !(self.vad.min_silence > 0.0) || !self.vad.threshold.is_finite() {
            bail!(Config, "VAD needs a finite threshold and a positive minimum silence");
        }
        Ok(())
    }
}

/// A recognized utterance placed on the session timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedUtterance {
    pub speaker_label: String,
    pub tokens: Vec<TokenId>,
    pub start: f64,
    pub end: f64,
    /// Index of the segment it was recognized in.
    pub segment: usize,
}

/// The decoding result of one segment.
#[derive(Debug, Clone)]
pub struct SegmentRecognition {
    pub offset: f64,
    pub best: Option<Hypothesis>,
    /// Utterances of the best hypothesis, unmerged, with session times.
    pub utterances: Vec<UtteranceHypothesis>,
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct Diarization {
    /// Ordered by segment, then estimated start.
    pub utterances: Vec<AttributedUtterance>,
    /// Number of speakers found; 0 when nothing was recognized.
    pub k: usize,
    /// Pooled utterance embeddings, in segment order.
    pub embeddings: Vec<Vec<f64>>,
    pub clusters: Option<ClusterResult>,
    pub nme: Option<NmeOutcome>,
    pub segments: Vec<SegmentRecognition>,
}

/// Cuts a session at silences found on one energy channel. Segment starts
/// are aligned to `align` frames.
pub fn segment_features(features: &FeatureSequence, energy_channel: usize, vad: &VadConfig, align: usize) -> Result<Vec<Segment>> {
    if energy_channel >= features.dim() {
        bail!(Config, "energy channel {energy_channel} outside {} feature dimensions", features.dim());
    }
    let energy = features.frames().column(energy_channel);
    let spans = segment_silence(&energy, features.frame_shift(), vad.threshold, vad.min_silence)?;
    cut_segments(features, &spans, align)
}

/// Decodes every segment with the given inventory and splits the best
/// hypothesis into utterances carrying session times.
pub fn recognize_segments(
    model: &Model,
    segments: &[Segment],
    inv: &SpeakerInventory,
    specials: Specials,
    beam: &BeamConfig,
    margin: f64,
    scorers: &[&dyn ExternalScorer],
    exec: Execution,
) -> Result<Vec<SegmentRecognition>> {
    exec::map(exec, segments, |seg| {
        let input = model.encode_prepared(&seg.features)?;
        let shift = input.encoded().frame_shift();
        let best = beam_search(model, &input, inv, specials.eos, specials.eos, beam, scorers)?.into_iter().next();
        let Some(best) = best else {
            return Ok(SegmentRecognition { offset: seg.offset, best: None, utterances: Vec::new(), dropped: 0 });
        };
        let split = split_utterances(&best, inv, specials)?;
        let utterances = split
            .utterances
            .into_iter()
            .map(|mut u| {
                u.times = Some(estimate_boundaries(&u.alpha_rows, shift, margin, seg.offset)?);
                Ok(u)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SegmentRecognition { offset: seg.offset, best: Some(best), utterances, dropped: split.dropped })
    })
    .into_iter()
    .collect()
}

fn attributed(segment: usize, u: &UtteranceHypothesis, label: String) -> AttributedUtterance {
    let (start, end) = u.times.unwrap_or((0.0, 0.0));
    AttributedUtterance { speaker_label: label, tokens: u.tokens.clone(), start, end, segment }
}

fn sort_session(us: &mut [AttributedUtterance]) {
    us.sort_by(|a, b| a.segment.cmp(&b.segment).then(a.start.total_cmp(&b.start)));
}

/// Profile mode: speakers are inventory entries; same-speaker utterances of
/// a segment are merged.
pub fn transcribe_with_profiles(
    model: &Model,
    segments: &[Segment],
    profiles: &SpeakerInventory,
    specials: Specials,
    config: &DiarizeConfig,
    scorers: &[&dyn ExternalScorer],
) -> Result<Vec<AttributedUtterance>> {
    config.validate()?;
    let recognized = recognize_segments(model, segments, profiles, specials, &config.beam, config.margin, scorers, config.execution)?;
    let mut out = Vec::new();
    for (s, rec) in recognized.iter().enumerate() {
        for u in merge_same_speaker(rec.utterances.clone()) {
            out.push(attributed(s, &u, u.speaker_label.clone()));
        }
    }
    sort_session(&mut out);
    Ok(out)
}

/// Speaker count for pooled embeddings under `counting`.
pub fn count_speakers(a: &AffinityMatrix, counting: Counting, max_speakers: usize, exec: Execution) -> Result<(usize, Option<NmeOutcome>)> {
    match counting {
        Counting::Oracle(k) => {
            if k > a.len() {
                log::warn!("oracle count {k} exceeds the {} recognized utterances; using {}", a.len(), a.len());
            }
            Ok((k.min(a.len()), None))
        }
        Counting::Nme => {
            let outcome = nme_search(a, max_speakers, exec)?;
            Ok((outcome.k, Some(outcome)))
        }
    }
}

/// Profile-free diarization. Every segment is decoded against example
/// profiles that need not belong to anyone present; the chosen embeddings of
/// all utterances in the session are then counted and clustered, and the
/// cluster ids become speaker labels `cluster{id}`.
pub fn diarize_session(
    model: &Model,
    segments: &[Segment],
    example_profiles: &SpeakerInventory,
    specials: Specials,
    config: &DiarizeConfig,
    scorers: &[&dyn ExternalScorer],
) -> Result<Diarization> {
    config.validate()?;
    let recognized = recognize_segments(model, segments, example_profiles, specials, &config.beam, config.margin, scorers, config.execution)?;
    cluster_recognized(recognized, config)
}

/// Counting and clustering over already decoded segments. Only the
/// embedding, counting, `max_speakers`, seed and execution settings apply.
pub fn cluster_recognized(recognized: Vec<SegmentRecognition>, config: &DiarizeConfig) -> Result<Diarization> {
    config.validate()?;
    let pooled: Vec<(usize, &UtteranceHypothesis)> =
        recognized.iter().enumerate().flat_map(|(s, r)| r.utterances.iter().map(move |u| (s, u))).collect();
    if pooled.is_empty() {
        return Ok(Diarization { utterances: Vec::new(), k: 0, embeddings: Vec::new(), clusters: None, nme: None, segments: recognized });
    }
    let embeddings: Vec<Vec<f64>> = pooled
        .iter()
        .map(|(_, u)| match config.embedding {
            Embedding::Query => u.query.clone(),
            Embedding::WeightedProfile => u.d_bar.clone(),
        })
        .collect();
    let affinity = build_affinity(&embeddings)?;
    let (k, nme) = count_speakers(&affinity, config.counting, config.max_speakers, config.execution)?;
    let clusters = spectral_cluster(&affinity, k, config.seed, config.execution)?;
    let mut utterances: Vec<AttributedUtterance> =
        pooled.iter().zip(&clusters.labels).map(|((s, u), l)| attributed(*s, u, format!("cluster{l}"))).collect();
    sort_session(&mut utterances);
    Ok(Diarization { utterances, k: clusters.k, embeddings, clusters: Some(clusters), nme, segments: recognized })
}

/// Per-speaker word sequences in time order, ready for cpWER.
pub fn speaker_transcripts(us: &[AttributedUtterance], vocab: &Vocabulary) -> SpeakerTranscripts {
    let mut sorted: Vec<&AttributedUtterance> = us.iter().collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.segment.cmp(&b.segment)));
    let mut out = SpeakerTranscripts::new();
    for u in sorted {
        out.entry(u.speaker_label.clone()).or_default().push(vocab.detokenize(&u.tokens));
    }
    out
}

/// Per-speaker speech intervals for DER.
pub fn timed_speech(us: &[AttributedUtterance]) -> Result<Vec<TimedSpeech>> {
    let mut by: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for u in us {
        by.entry(&u.speaker_label).or_default().push((u.start, u.end));
    }
    by.into_iter().map(|(k, v)| TimedSpeech::new(k, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{ModelConfig, SpeakerProfile};
    use rand::SeedableRng;

    #[test]
    fn counting_round_trips() {
        assert_eq!("nme".parse::<Counting>().unwrap(), Counting::Nme);
        assert_eq!("oracle:3".parse::<Counting>().unwrap(), Counting::Oracle(3));
        assert!("oracle:0".parse::<Counting>().is_err());
        assert!("bogus".parse::<Counting>().is_err());
        let json = serde_json::to_string(&Counting::Oracle(5)).unwrap();
        assert_eq!(json, "\"oracle:5\"");
        assert_eq!(serde_json::from_str::<Counting>(&json).unwrap(), Counting::Oracle(5));
        assert_eq!("weighted_profile".parse::<Embedding>().unwrap(), Embedding::WeightedProfile);
    }

    fn tiny() -> (Model, SpeakerInventory, Specials) {
        let cfg = ModelConfig { vocab_size: 5, ..crate::model::tests::small_config() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let model = Model::random(cfg, &mut rng, 0.8).unwrap();
        let inv = SpeakerInventory::new((0..3).map(|i| SpeakerProfile::new(format!("ex{i}"), (0..4).map(|j| ((i * 4 + j) as f64).sin()).collect())).collect()).unwrap();
        (model, inv, Specials { sc: 1, eos: 0 })
    }

    fn segments(model: &Model, n: usize) -> Vec<Segment> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        (0..n)
            .map(|s| {
                let m = crate::model::layers::random_matrix(&mut rng, 9, model.config.feat_dim, 1.0);
                Segment { features: FeatureSequence::new(m, 0.01).unwrap(), offset: 2.0 * s as f64 }
            })
            .collect()
    }

    #[test]
    fn oracle_count_matches_direct_clustering() {
        let (model, inv, sp) = tiny();
        let segs = segments(&model, 4);
        let config = DiarizeConfig { counting: Counting::Oracle(2), beam: BeamConfig { max_len: 6, ..Default::default() }, ..Default::default() };
        let d = diarize_session(&model, &segs, &inv, sp, &config, &[]).unwrap();
        let m = d.embeddings.len();
        assert!(m >= 2, "expected several utterances, got {m}");
        let direct = spectral_cluster(&build_affinity(&d.embeddings).unwrap(), 2, config.seed, Execution::Sequential).unwrap();
        assert_eq!(d.clusters.as_ref().unwrap(), &direct);
        let labels: std::collections::BTreeSet<_> = d.utterances.iter().map(|u| u.speaker_label.clone()).collect();
        assert_eq!(labels.len(), 2);
        for w in d.utterances.windows(2) {
            assert!((w[0].segment, w[0].start) <= (w[1].segment, w[1].start));
        }
        let seq = diarize_session(&model, &segs, &inv, sp, &DiarizeConfig { execution: Execution::Sequential, ..config }, &[]).unwrap();
        assert_eq!(seq.utterances, d.utterances);
    }

    #[test]
    fn no_segments_is_empty() {
        let (model, inv, sp) = tiny();
        let d = diarize_session(&model, &[], &inv, sp, &DiarizeConfig::default(), &[]).unwrap();
        assert!(d.utterances.is_empty());
        assert_eq!(d.k, 0);
    }

    #[test]
    fn single_profile_labels_everything() {
        let (model, _, sp) = tiny();
        let one = SpeakerInventory::new(vec![SpeakerProfile::new("solo", vec![1.0, 0.0, 0.5, 0.0])]).unwrap();
        let segs = segments(&model, 3);
        let config = DiarizeConfig { beam: BeamConfig { max_len: 6, ..Default::default() }, ..Default::default() };
        let us = transcribe_with_profiles(&model, &segs, &one, sp, &config, &[]).unwrap();
        assert!(!us.is_empty());
        assert!(us.iter().all(|u| u.speaker_label == "solo"));
        assert!(us.iter().all(|u| u.start <= u.end && u.start >= 0.0));
    }

    #[test]
    fn segmentation_uses_energy_channel() {
        let mut m = Matrix::zeros(12, 2);
        for t in [0, 1, 2, 9, 10, 11] {
            m[(t, 1)] = 1.0;
        }
        let f = FeatureSequence::new(m, 0.1).unwrap();
        let segs = segment_features(&f, 1, &VadConfig { threshold: 0.5, min_silence: 0.3 }, 3).unwrap();
        assert_eq!(segs.len(), 2);
        assert!((segs[1].offset - 0.9).abs() < 1e-12);
        assert!(segment_features(&f, 2, &VadConfig::default(), 3).is_err());
    }
}
