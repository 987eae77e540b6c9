//! Synthetic sessions with known ground truth.
//!
//! Sessions live in feature space (see [`crate::layout`]). Every reference
//! token is planted as an event frame carrying the token, the token before
//! it in the utterance-ordered serialization of its segment, and the
//! speaker's signature. Between events the speaker stream is low-level
//! noise, and the energy channel counts active talkers.
//!
//! Two generators are provided: short fully overlapped mixtures obeying the
//! training-sample conditions, and longer meetings laid out according to a
//! named overlap preset.

mod render;
mod timeline;
mod verify;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use verify::{overlap_ratio, verify_conditions, verify_meeting, Condition, Violation};

use crate::diarize::VadConfig;
use crate::error::{bail, Error, Result};
use crate::labels::ReferenceUtterance;
use crate::layout::FeatureLayout;
use crate::linalg::{cosine, norm};
use crate::model::{FeatureSequence, SpeakerInventory, SpeakerProfile, Vocabulary};

pub const EOS_TOKEN: &str = "<eos>";
pub const SC_TOKEN: &str = "<sc>";
pub const WORD_BOUNDARY: &str = "▁";

/// Feature-level knobs shared by both generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sig_dim: usize,
    /// Number of word tokens; the vocabulary adds the two reserved symbols.
    pub content_vocab: usize,
    pub tokens_per_utterance: (usize, usize),
    /// Utterance duration range, seconds.
    pub duration: (f64, f64),
    /// Largest cosine allowed between two speakers' signatures.
    pub signature_max_cosine: f64,
    /// Per-channel noise on the signature at event frames.
    pub signature_noise: f64,
    /// Per-channel noise on the speaker stream elsewhere.
    pub background: f64,
    pub energy_noise: f64,
    /// Noise added to a signature to make that speaker's profile.
    pub profile_noise: f64,
    /// The silence rule that delimits segments; recognition must use the same.
    pub vad: VadConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sig_dim: 16,
            content_vocab: 128,
            tokens_per_utterance: (3, 6),
            duration: (1.5, 3.0),
            signature_max_cosine: 0.5,
            signature_noise: 0.1,
            background: 0.05,
            energy_noise: 0.05,
            profile_noise: 0.1,
            vad: VadConfig::default(),
        }
    }
}

impl FeatureConfig {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout { vocab_size: self.content_vocab + 2, sig_dim: self.sig_dim }
    }

    fn validate(&self) -> Result<()> {
        let (t0, t1) = self.tokens_per_utterance;
        let (d0, d1) = self.duration;
        if self.sig_dim == 0 || self.content_vocab == 0 || t0 == 0 || t0 > t1 || !(d0 > 0.0 && d0 <= d1) {
            bail!(Config, "feature config needs positive sizes and ordered ranges");
        }
        if !(self.signature_max_cosine > -1.0 && self.signature_max_cosine < 1.0) {
            bail!(Config, "signature_max_cosine must lie in (-1, 1)");
        }
        if [self.signature_noise, self.background, self.energy_noise, self.profile_noise].iter().any(|x| !(*x >= 0.0)) {
            bail!(Config, "noise levels must be non-negative");
        }
        if !(self.vad.min_silence > 0.0) {
            bail!(Config, "VAD minimum silence must be positive");
        }
        Ok(())
    }
}

/// Training-sample style mixture: every utterance overlaps another speaker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    pub n_speakers: (usize, usize),
    pub n_utterances: (usize, usize),
    /// Minimum distance between any two utterance starts, seconds.
    pub min_start_gap: f64,
    /// Total profile count; the lower end is raised to the speaker count.
    pub profile_count: (usize, usize),
    pub max_attempts: usize,
    pub features: FeatureConfig,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self { n_speakers: (1, 5), n_utterances: (1, 5), min_start_gap: 0.5, profile_count: (1, 8), max_attempts: 1000, features: FeatureConfig::default() }
    }
}

/// Overlap layouts named after the evaluation mini-session conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Preset {
    /// No overlap, 0.1-0.5 s between utterances.
    ShortSilence,
    /// No overlap, 2.9-3.0 s between utterances.
    LongSilence,
    /// Pairs of utterances overlapping by the given percentage of their span.
    Overlap(u8),
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::ShortSilence, Preset::LongSilence, Preset::Overlap(10), Preset::Overlap(20), Preset::Overlap(30), Preset::Overlap(40)];
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0S" => Ok(Self::ShortSilence),
            "0L" => Ok(Self::LongSilence),
            "10" | "20" | "30" | "40" => Ok(Self::Overlap(s.parse().expect("digits"))),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected 0S, 0L, 10, 20, 30 or 40)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShortSilence => f.write_str("0S"),
            Self::LongSilence => f.write_str("0L"),
            Self::Overlap(r) => write!(f, "{r}"),
        }
    }
}

impl TryFrom<String> for Preset {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> Self {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeetingConfig {
    pub preset: Preset,
    pub n_speakers: (usize, usize),
    pub utterances_per_speaker: (usize, usize),
    pub min_start_gap: f64,
    /// Profiles of people absent from the session, used as example profiles.
    pub example_profiles: usize,
    pub max_attempts: usize,
    pub features: FeatureConfig,
}

impl Default for MeetingConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Overlap(20),
            n_speakers: (3, 8),
            utterances_per_speaker: (2, 3),
            min_start_gap: 0.5,
            example_profiles: 16,
            max_attempts: 200,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SessionKind {
    Mixture,
    Meeting { preset: Preset },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub kind: SessionKind,
    pub seed: u64,
    pub layout: FeatureLayout,
    pub vocabulary: Vocabulary,
    /// Raw frames, 10 ms apart.
    pub features: FeatureSequence,
    /// In start order.
    pub references: Vec<ReferenceUtterance>,
    /// One profile per speaker present, id equal to the reference speaker id.
    pub relevant_profiles: SpeakerInventory,
    pub irrelevant_profiles: Vec<SpeakerProfile>,
}

impl SyntheticSession {
    pub fn speaker_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.references.iter().map(|r| r.speaker_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Irrelevant profiles as an inventory, if there are any.
    pub fn example_inventory(&self) -> Result<SpeakerInventory> {
        SpeakerInventory::new(self.irrelevant_profiles.clone())
    }
}

/// Reserved symbols first (`<eos>` = 0, `<sc>` = 1), then `content` two-syllable
/// words, each a single token starting with the word-boundary marker.
pub fn synthetic_vocabulary(content: usize) -> Result<Vocabulary> {
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let n_syl = CONSONANTS.len() * VOWELS.len();
    if content > n_syl * n_syl {
        bail!(Config, "at most {} synthetic words are available", n_syl * n_syl);
    }
    let syllable = |i: usize| format!("{}{}", CONSONANTS[i / VOWELS.len()] as char, VOWELS[i % VOWELS.len()] as char);
    let mut tokens = vec![EOS_TOKEN.to_owned(), SC_TOKEN.to_owned()];
    for i in 0..content {
        let (a, b) = (i % n_syl, i / n_syl);
        tokens.push(format!("{WORD_BOUNDARY}{}{}", syllable(a), syllable((a * 13 + b * 17 + 5) % n_syl)));
    }
    Vocabulary::new(tokens, SC_TOKEN, EOS_TOKEN, Some(WORD_BOUNDARY.to_owned()))
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit signatures whose pairwise cosines stay at or below `max_cosine`.
fn signatures(rng: &mut ChaCha8Rng, count: usize, dim: usize, max_cosine: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 10_000 {
            bail!(Config, "cannot place {count} signatures in {dim} dimensions with cosine <= {max_cosine}");
        }
        let s = gaussian_unit(rng, dim);
        if out.iter().all(|o| cosine(o, &s).expect("unit vectors") <= max_cosine) {
            out.push(s);
        }
    }
    Ok(out)
}

fn noisy(rng: &mut ChaCha8Rng, v: &[f64], std: f64) -> Vec<f64> {
    v.iter().map(|x| x + std * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub(crate) fn speaker_id(i: usize) -> String {
    format!("spk{i}")
}

fn profiles(rng: &mut ChaCha8Rng, fc: &FeatureConfig, sigs: &[Vec<f64>], irrelevant: usize) -> Result<(SpeakerInventory, Vec<SpeakerProfile>)> {
    let relevant = SpeakerInventory::new(sigs.iter().enumerate().map(|(i, s)| SpeakerProfile::new(speaker_id(i), noisy(rng, s, fc.profile_noise))).collect())?;
    let others = (0..irrelevant).map(|j| SpeakerProfile::new(format!("ext{j}"), gaussian_unit(rng, fc.sig_dim))).collect();
    Ok((relevant, others))
}

/// A mixture obeying every condition of `config`, reproducible from `seed`.
pub fn generate_mixture(seed: u64, config: &MixtureConfig) -> Result<SyntheticSession> {
    let fc = &config.features;
    fc.validate()?;
    let (s0, s1) = config.n_speakers;
    let (u0, u1) = config.n_utterances;
    if s0 == 0 || s0 > s1 || u0 == 0 || u0 > u1 || !(config.min_start_gap > 0.0) || config.profile_count.0 > config.profile_count.1 {
        bail!(Config, "mixture ranges must be non-empty and the start gap positive");
    }
    let vocabulary = synthetic_vocabulary(fc.content_vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_attempts.max(1) {
        let Some(placed) = timeline::mixture(&mut rng, config) else { continue };
        let n_speakers = placed.iter().map(|p| p.speaker).max().map_or(0, |m| m + 1);
        let sigs = signatures(&mut rng, n_speakers, fc.sig_dim, fc.signature_max_cosine)?;
        let Some((features, references)) = render::render(&mut rng, fc, &placed, &sigs)? else { continue };
        let lo = config.profile_count.0.max(n_speakers);
        let hi = config.profile_count.1.max(lo);
        let total = rng.random_range(lo..=hi);
        let (relevant_profiles, irrelevant_profiles) = profiles(&mut rng, fc, &sigs, total - n_speakers)?;
        return Ok(SyntheticSession { kind: SessionKind::Mixture, seed, layout: fc.layout(), vocabulary, features, references, relevant_profiles, irrelevant_profiles });
    }
    bail!(Config, "no valid mixture found in {} attempts; the ranges may be infeasible", config.max_attempts)
}

/// A meeting laid out by `config.preset`, reproducible from `seed`.
pub fn generate_meeting(seed: u64, config: &MeetingConfig) -> Result<SyntheticSession> {
    let fc = &config.features;
    fc.validate()?;
    let (s0, s1) = config.n_speakers;
    let (u0, u1) = config.utterances_per_speaker;
    if s0 == 0 || s0 > s1 || u0 == 0 || u0 > u1 || !(config.min_start_gap > 0.0) {
        bail!(Config, "meeting ranges must be non-empty and the start gap positive");
    }
    if fc.duration.0 <= config.min_start_gap + 0.1 {
        bail!(Config, "utterances must last longer than the start gap");
    }
    let vocabulary = synthetic_vocabulary(fc.content_vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_attempts.max(1) {
        let Some(placed) = timeline::meeting(&mut rng, config) else { continue };
        let n_speakers = placed.iter().map(|p| p.speaker).max().map_or(0, |m| m + 1);
        let sigs = signatures(&mut rng, n_speakers, fc.sig_dim, fc.signature_max_cosine)?;
        let Some((features, references)) = render::render(&mut rng, fc, &placed, &sigs)? else { continue };
        let (relevant_profiles, irrelevant_profiles) = profiles(&mut rng, fc, &sigs, config.example_profiles)?;
        return Ok(SyntheticSession {
            kind: SessionKind::Meeting { preset: config.preset },
            seed,
            layout: fc.layout(),
            vocabulary,
            features,
            references,
            relevant_profiles,
            irrelevant_profiles,
        });
    }
    bail!(Config, "no valid meeting found in {} attempts", config.max_attempts)
}
