//! Joint token and speaker log-likelihood of an attributed transcript under
//! teacher forcing.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::{FeatureSequence, Model, PreparedInput, SpeakerInventory, Specials, TokenId};

/// Serialized transcript with one speaker index per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributedTranscript {
    pub tokens: Vec<TokenId>,
    pub speakers: Vec<usize>,
}

impl AttributedTranscript {
    /// Checks lengths, the final end symbol, and that the speaker stays fixed
    /// inside every utterance (the closing `<sc>`/`<eos>` belongs to the
    /// utterance it closes).
    pub fn new(tokens: Vec<TokenId>, speakers: Vec<usize>, specials: Specials) -> Result<Self> {
        if tokens.len() != speakers.len() {
            bail!(Contract, "{} tokens but {} speaker indices", tokens.len(), speakers.len());
        }
        if tokens.last() != Some(&specials.eos) {
            bail!(Contract, "transcript must end with the end symbol");
        }
        if tokens[..tokens.len() - 1].contains(&specials.eos) {
            bail!(Contract, "end symbol inside the transcript");
        }
        let mut current = None;
        for (n, (&y, &s)) in tokens.iter().zip(&speakers).enumerate() {
            match current {
                Some(c) if c != s => bail!(Contract, "speaker changes inside an utterance at position {n}"),
                _ => current = Some(s),
            }
            if y == specials.sc {
                current = None;
            }
        }
        Ok(Self { tokens, speakers })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The two sums making up the score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTerms {
    /// `Σ log Pr(y_n | ·)`.
    pub token: f64,
    /// `Σ log Pr(s_n | ·)`, i.e. log β at the reference speaker.
    pub speaker: f64,
}

impl ScoreTerms {
    pub fn combined(&self, gamma: f64) -> f64 {
        self.token + gamma * self.speaker
    }
}

pub fn sa_mmi_terms(model: &Model, input: &PreparedInput, t: &AttributedTranscript, inv: &SpeakerInventory, sos: TokenId) -> Result<ScoreTerms> {
    if t.tokens.len() != t.speakers.len() {
        bail!(Contract, "{} tokens but {} speaker indices", t.tokens.len(), t.speakers.len());
    }
    if let Some(&s) = t.speakers.iter().find(|&&s| s >= inv.len()) {
        bail!(Contract, "speaker index {s} outside inventory of {}", inv.len());
    }
    let steps = model.teacher_force(input, inv, &t.tokens, sos)?;
    let mut terms = ScoreTerms { token: 0.0, speaker: 0.0 };
    for ((out, &y), &s) in steps.iter().zip(&t.tokens).zip(&t.speakers) {
        terms.token += out.token_logprobs[y];
        terms.speaker += out.beta[s].ln();
    }
    Ok(terms)
}

/// `Σ_n [log Pr(y_n) + γ log Pr(s_n)]`.
pub fn sa_mmi_score(model: &Model, x: &FeatureSequence, t: &AttributedTranscript, inv: &SpeakerInventory, gamma: f64, sos: TokenId) -> Result<f64> {
    let input = model.encode_prepared(x)?;
    Ok(sa_mmi_terms(model, &input, t, inv, sos)?.combined(gamma))
}
