//! JSON dump of decoded hypotheses for offline clustering and scoring.

use serde::{Deserialize, Serialize};

use super::{Hypothesis, UtteranceHypothesis};
use crate::model::{TokenId, Vocabulary};

pub const HYPOTHESES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub speaker: String,
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub query: Vec<f64>,
    pub d_bar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub tokens: Vec<TokenId>,
    pub log_score: f64,
    pub forced: bool,
    /// β per step.
    pub betas: Vec<Vec<f64>>,
    pub utterances: Vec<UtteranceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDump {
    pub offset: f64,
    pub hypotheses: Vec<HypothesisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisDump {
    pub schema_version: u32,
    pub kind: String,
    pub segments: Vec<SegmentDump>,
}

impl HypothesisDump {
    pub fn new(segments: Vec<SegmentDump>) -> Self {
        Self { schema_version: HYPOTHESES_SCHEMA_VERSION, kind: "hypotheses".into(), segments }
    }
}

impl UtteranceRecord {
    pub fn from_utterance(u: &UtteranceHypothesis, vocab: &Vocabulary) -> Self {
        Self {
            speaker: u.speaker_label.clone(),
            tokens: u.tokens.clone(),
            text: vocab.to_text(&u.tokens),
            query: u.query.clone(),
            d_bar: u.d_bar.clone(),
            start: u.times.map(|t| t.0),
            end: u.times.map(|t| t.1),
        }
    }
}

impl HypothesisRecord {
    pub fn new(h: &Hypothesis, utterances: &[UtteranceHypothesis], vocab: &Vocabulary) -> Self {
        Self {
            tokens: h.tokens.clone(),
            log_score: h.log_score,
            forced: h.forced,
            betas: h.betas.clone(),
            utterances: utterances.iter().map(|u| UtteranceRecord::from_utterance(u, vocab)).collect(),
        }
    }
}
