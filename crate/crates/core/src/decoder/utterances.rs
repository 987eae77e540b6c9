use serde::{Deserialize, Serialize};

use super::Hypothesis;
use crate::error::{bail, Result};
use crate::linalg::argmax;
use crate::model::{SpeakerInventory, Specials, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceHypothesis {
    /// Content tokens only.
    pub tokens: Vec<TokenId>,
    pub speaker_label: String,
    /// Inventory index behind the label, when it came from a profile.
    pub speaker_index: Option<usize>,
    /// Speaker query at the closing step.
    pub query: Vec<f64>,
    /// Weighted profile at the closing step.
    pub d_bar: Vec<f64>,
    /// Attention rows of the content tokens.
    pub alpha_rows: Vec<Vec<f64>>,
    pub times: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub utterances: Vec<UtteranceHypothesis>,
    /// Empty utterances (consecutive change tokens) that were skipped.
    pub dropped: usize,
}

/// Cuts a hypothesis at every `<sc>`. Each piece takes the speaker with the
/// highest β at its closing `<sc>`/`<eos>` step, lowest index on ties, and
/// the query of that step.
pub fn split_utterances(h: &Hypothesis, inv: &SpeakerInventory, specials: Specials) -> Result<SplitResult> {
    let n = h.tokens.len();
    if h.betas.len() != n || h.queries.len() != n || h.alphas.len() != n || h.d_bars.len() != n {
        bail!(Contract, "hypothesis step records do not match its {n} tokens");
    }
    let terminated = h.tokens.last() == Some(&specials.eos);
    if !terminated && !h.forced {
        bail!(Contract, "hypothesis neither ends with the end symbol nor is flagged as forced");
    }
    let mut out = SplitResult { utterances: Vec::new(), dropped: 0 };
    let mut tokens = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        let y = h.tokens[i];
        let closing = y == specials.sc || y == specials.eos || i + 1 == n;
        if y != specials.sc && y != specials.eos {
            tokens.push(y);
            rows.push(h.alphas[i].clone());
        }
        if !closing {
            continue;
        }
        if tokens.is_empty() {
            if y == specials.sc {
                out.dropped += 1;
            }
        } else {
            if h.betas[i].len() != inv.len() {
                bail!(Contract, "β at step {i} has {} entries for {} profiles", h.betas[i].len(), inv.len());
            }
            let k = argmax(&h.betas[i]);
            out.utterances.push(UtteranceHypothesis {
                tokens: std::mem::take(&mut tokens),
                speaker_label: inv.get(k).speaker_id.clone(),
                speaker_index: Some(k),
                query: h.queries[i].clone(),
                d_bar: h.d_bars[i].clone(),
                alpha_rows: std::mem::take(&mut rows),
                times: None,
            });
        }
        if y == specials.eos {
            break;
        }
    }
    if out.dropped > 0 {
        log::warn!("dropped {} empty utterance(s)", out.dropped);
    }
    Ok(out)
}

/// One utterance per speaker label, in order of first appearance. Tokens and
/// attention rows are concatenated in the original order; the query is that
/// of the first utterance and the time span covers all merged pieces.
pub fn merge_same_speaker(us: Vec<UtteranceHypothesis>) -> Vec<UtteranceHypothesis> {
    let mut merged: Vec<UtteranceHypothesis> = Vec::new();
    for u in us {
        match merged.iter_mut().find(|m| m.speaker_label == u.speaker_label) {
            Some(m) => {
                m.tokens.extend(u.tokens);
                m.alpha_rows.extend(u.alpha_rows);
                m.times = match (m.times, u.times) {
                    (Some((s0, e0)), Some((s1, e1))) => Some((s0.min(s1), e0.max(e1))),
                    (a, b) => a.or(b),
                };
            }
            None => merged.push(u),
        }
    }
    merged
}
