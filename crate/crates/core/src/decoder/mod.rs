//! Beam search over the speaker-attributed decoder, utterance grouping at
//! speaker-change tokens, and external scorers for shallow fusion.

mod dump;
mod utterances;

use std::rc::Rc;

use serde::{Deserialize, Serialize};

pub use dump::{HypothesisDump, HypothesisRecord, SegmentDump, UtteranceRecord};
pub use utterances::{merge_same_speaker, split_utterances, SplitResult, UtteranceHypothesis};

use crate::error::{bail, Result};
use crate::linalg::log_sum_exp;
use crate::model::{DecoderState, Model, PreparedInput, SpeakerInventory, TokenId};

/// A language model or other next-token scorer fused by weighted sum.
pub trait ExternalScorer: Sync {
    /// Log-scores over the vocabulary given the tokens emitted so far. They
    /// are log-normalized before use.
    fn score_next(&self, history: &[TokenId]) -> Vec<f64>;
    fn weight(&self) -> f64;
}

/// Assigns equal probability to every token.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
    pub weight: f64,
}

impl ExternalScorer for UniformScorer {
    fn score_next(&self, _history: &[TokenId]) -> Vec<f64> {
        vec![0.0; self.vocab_size]
    }

    fn weight(&self) -> f64 {
        self.weight
    }
}

/// Bigram table scorer: `table[prev][next]` log-scores, `prev` being the
/// start symbol for the first token.
#[derive(Debug, Clone)]
pub struct BigramScorer {
    pub table: Vec<Vec<f64>>,
    pub start: TokenId,
    pub weight: f64,
}

impl ExternalScorer for BigramScorer {
    fn score_next(&self, history: &[TokenId]) -> Vec<f64> {
        self.table[*history.last().unwrap_or(&self.start)].clone()
    }

    fn weight(&self) -> f64 {
        self.weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub max_len: usize,
    /// Added to the score for every emitted token.
    pub length_bonus: f64,
    /// When set, `γ · log max_k β_k` is added per step.
    pub speaker_term: Option<f64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { beam_width: 4, max_len: 200, length_bonus: 0.0, speaker_term: None }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.max_len == 0 {
            bail!(Config, "beam width and maximum length must be at least 1");
        }
        if !self.length_bonus.is_finite() || self.speaker_term.is_some_and(|g| !g.is_finite()) {
            bail!(Config, "beam score terms must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    /// Ranking score: model log-probability plus every enabled extra term.
    pub log_score: f64,
    /// Model token log-probability alone.
    pub token_logprob: f64,
    pub betas: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub d_bars: Vec<Vec<f64>>,
    pub alphas: Vec<Vec<f64>>,
    pub state: DecoderState,
    /// Hit the length limit without emitting the end symbol.
    pub forced: bool,
}

struct Step {
    beta: Vec<f64>,
    query: Vec<f64>,
    d_bar: Vec<f64>,
    alpha: Vec<f64>,
    prev: Option<Rc<Step>>,
}

struct Partial {
    state: DecoderState,
    score: f64,
    token_logprob: f64,
    tokens: Vec<TokenId>,
    last: Option<Rc<Step>>,
}

struct Ended {
    partial: Partial,
    forced: bool,
}

fn materialize(p: Partial, forced: bool) -> Hypothesis {
    let mut steps = Vec::with_capacity(p.tokens.len());
    let mut cur = p.last;
    while let Some(step) = cur {
        cur = step.prev.clone();
        steps.push(step);
    }
    steps.reverse();
    Hypothesis {
        tokens: p.tokens,
        log_score: p.score,
        token_logprob: p.token_logprob,
        betas: steps.iter().map(|s| s.beta.clone()).collect(),
        queries: steps.iter().map(|s| s.query.clone()).collect(),
        d_bars: steps.iter().map(|s| s.d_bar.clone()).collect(),
        alphas: steps.iter().map(|s| s.alpha.clone()).collect(),
        state: p.state,
        forced,
    }
}

/// Ranked hypotheses, best first. Every hypothesis ends with `eos` or is
/// flagged as forced at `max_len`.
pub fn beam_search(
    model: &Model,
    input: &PreparedInput,
    inv: &SpeakerInventory,
    sos: TokenId,
    eos: TokenId,
    config: &BeamConfig,
    scorers: &[&dyn ExternalScorer],
) -> Result<Vec<Hypothesis>> {
    config.validate()?;
    let v = model.vocab_size();
    if sos >= v || eos >= v {
        bail!(Config, "reserved symbols outside vocabulary of {v}");
    }
    let monotone = config.length_bonus <= 0.0
        && config.speaker_term.is_none_or(|g| g >= 0.0)
        && scorers.iter().all(|s| s.weight() >= 0.0);

    let mut alive = vec![Partial {
        state: model.initial_state(input.encoded(), sos),
        score: 0.0,
        token_logprob: 0.0,
        tokens: Vec::new(),
        last: None,
    }];
    let mut ended: Vec<Ended> = Vec::new();

    for n in 0..config.max_len {
        let mut expansions = Vec::with_capacity(alive.len());
        let mut candidates: Vec<(f64, usize, TokenId)> = Vec::with_capacity(alive.len() * v);
        for (h, partial) in alive.iter().enumerate() {
            let (out, next) = model.decode_step(&partial.state, input, inv)?;
            let mut inc = out.token_logprobs.clone();
            for scorer in scorers {
                let raw = scorer.score_next(&partial.tokens);
                if raw.len() != v {
                    bail!(Config, "external scorer returned {} scores for a vocabulary of {v}", raw.len());
                }
                let lse = log_sum_exp(&raw);
                if !lse.is_finite() {
                    bail!(Domain, "external scorer output cannot be normalized");
                }
                let w = scorer.weight();
                for (i, r) in inc.iter_mut().zip(&raw) {
                    *i += w * (r - lse);
                }
            }
            let mut extra = config.length_bonus;
            if let Some(gamma) = config.speaker_term {
                extra += gamma * out.beta.iter().copied().fold(0.0, f64::max).ln();
            }
            for (y, i) in inc.iter().enumerate() {
                candidates.push((partial.score + i + extra, h, y));
            }
            expansions.push((out, next));
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(config.beam_width);

        let mut next_alive = Vec::with_capacity(candidates.len());
        for (score, h, y) in candidates {
            let (out, next) = &expansions[h];
            let parent = &alive[h];
            let step = Rc::new(Step {
                beta: out.beta.clone(),
                query: out.q.clone(),
                d_bar: out.d_bar.clone(),
                alpha: out.alpha.clone(),
                prev: parent.last.clone(),
            });
            let mut tokens = parent.tokens.clone();
            tokens.push(y);
            let partial = Partial {
                state: next.clone().with_token(y),
                score,
                token_logprob: parent.token_logprob + out.token_logprobs[y],
                tokens,
                last: Some(step),
            };
            if y == eos {
                ended.push(Ended { partial, forced: false });
            } else if n + 1 == config.max_len {
                ended.push(Ended { partial, forced: true });
            } else {
                next_alive.push(partial);
            }
        }
        alive = next_alive;
        if alive.is_empty() {
            break;
        }
        if monotone {
            let best_ended = ended.iter().map(|e| e.partial.score).fold(f64::NEG_INFINITY, f64::max);
            let best_alive = alive.iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
            if best_ended >= best_alive {
                break;
            }
        }
    }

    ended.sort_by(|a, b| b.partial.score.total_cmp(&a.partial.score));
    Ok(ended.into_iter().map(|e| materialize(e.partial, e.forced)).collect())
}

/// Argmax decoding: the most likely token at every step.
pub fn greedy_search(model: &Model, input: &PreparedInput, inv: &SpeakerInventory, sos: TokenId, eos: TokenId, max_len: usize) -> Result<Vec<TokenId>> {
    let mut state = model.initial_state(input.encoded(), sos);
    let mut tokens = Vec::new();
    for _ in 0..max_len {
        let (out, next) = model.decode_step(&state, input, inv)?;
        let y = crate::linalg::argmax(&out.token_logprobs);
        tokens.push(y);
        state = next.with_token(y);
        if y == eos {
            break;
        }
    }
    Ok(tokens)
}
