use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::linalg::{norm, Matrix};
use crate::model::vocab::TokenId;

/// Acoustic frames, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Matrix,
    frame_shift: f64,
}

impl FeatureSequence {
    pub fn new(frames: Matrix, frame_shift: f64) -> Result<Self> {
        if frames.rows() == 0 {
            bail!(Domain, "feature sequence has no frames");
        }
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            bail!(Domain, "frame shift must be positive, got {frame_shift}");
        }
        Ok(Self { frames, frame_shift })
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.len());
        if start >= end {
            bail!(Contract, "empty frame range {start}..{end}");
        }
        let cols = self.dim();
        let data = self.frames.as_slice()[start * cols..end * cols].to_vec();
        Self::new(Matrix::from_vec(end - start, cols, data)?, self.frame_shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub embedding: Vec<f64>,
}

impl SpeakerProfile {
    pub fn new(speaker_id: impl Into<String>, embedding: Vec<f64>) -> Self {
        Self { speaker_id: speaker_id.into(), embedding }
    }
}

/// Ordered, non-empty set of profiles sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SpeakerInventory {
    profiles: Vec<SpeakerProfile>,
}

impl SpeakerInventory {
    pub fn new(profiles: Vec<SpeakerProfile>) -> Result<Self> {
        let Some(first) = profiles.first() else {
            bail!(Config, "speaker inventory is empty");
        };
        let dim = first.embedding.len();
        let mut seen = std::collections::HashSet::new();
        for p in &profiles {
            if p.embedding.len() != dim {
                bail!(Config, "profile {} has dimension {}, expected {dim}", p.speaker_id, p.embedding.len());
            }
            if !seen.insert(p.speaker_id.as_str()) {
                bail!(Config, "duplicate speaker id {}", p.speaker_id);
            }
            if p.embedding.iter().any(|v| !v.is_finite()) || norm(&p.embedding) == 0.0 {
                bail!(Domain, "profile {} has a zero or non-finite embedding", p.speaker_id);
            }
        }
        Ok(Self { profiles })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.profiles[0].embedding.len()
    }

    pub fn profiles(&self) -> &[SpeakerProfile] {
        &self.profiles
    }

    pub fn get(&self, k: usize) -> &SpeakerProfile {
        &self.profiles[k]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.speaker_id.as_str())
    }
}

impl<'de> Deserialize<'de> for SpeakerInventory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let profiles = Vec::<SpeakerProfile>::deserialize(d)?;
        SpeakerInventory::new(profiles).map_err(serde::de::Error::custom)
    }
}

/// Encoder outputs. Both streams share the frame axis so one attention row
/// indexes both.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    h_enc: Matrix,
    h_spk: Matrix,
    frame_shift: f64,
}

impl EncodedInput {
    pub fn new(h_enc: Matrix, h_spk: Matrix, frame_shift: f64) -> Result<Self> {
        if h_enc.rows() != h_spk.rows() {
            bail!(Dimension, "encoder streams disagree on frame count: {} vs {}", h_enc.rows(), h_spk.rows());
        }
        if h_enc.rows() == 0 {
            bail!(Domain, "encoded input has no frames");
        }
        Ok(Self { h_enc, h_spk, frame_shift })
    }

    pub fn h_enc(&self) -> &Matrix {
        &self.h_enc
    }

    pub fn h_spk(&self) -> &Matrix {
        &self.h_spk
    }

    pub fn frames(&self) -> usize {
        self.h_enc.rows()
    }

    /// Seconds per encoded frame.
    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }
}

/// Recurrent state carried between decoding steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub u: Vec<f64>,
    pub u_cell: Vec<f64>,
    pub q: Vec<f64>,
    pub q_cell: Vec<f64>,
    pub out_h: Vec<f64>,
    pub out_cell: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub alpha_prev: Vec<f64>,
    /// `None` between a step and the caller's token choice.
    pub y_prev: Option<TokenId>,
}

impl DecoderState {
    /// Commits the token chosen at the last step.
    pub fn with_token(mut self, y: TokenId) -> Self {
        self.y_prev = Some(y);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub token_logprobs: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub q: Vec<f64>,
    pub d_bar: Vec<f64>,
}
