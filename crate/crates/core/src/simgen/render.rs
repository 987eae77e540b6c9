//! Event planting and feature synthesis.
//!
//! Within each silence-delimited segment the utterances are serialized in
//! start order. Every content token goes to an even encoder frame inside its
//! utterance; a change event sits on the odd frame right before the first
//! token of every utterance but the first, keyed by the last token before it
//! and carrying the previous speaker's signature. The frame after the final
//! token of a segment stays empty so the reader finds nothing and stops.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::timeline::Placed;
use super::{speaker_id, FeatureConfig};
use crate::diarize::segment_silence;
use crate::error::Result;
use crate::labels::ReferenceUtterance;
use crate::layout::{RAW_FRAME_SHIFT, STACK};
use crate::linalg::Matrix;
use crate::model::{FeatureSequence, TokenId};

const EOS: TokenId = 0;
const SC: TokenId = 1;

struct Event {
    token: TokenId,
    key: TokenId,
    speaker: usize,
}

fn raw(t: f64) -> usize {
    (t / RAW_FRAME_SHIFT).round() as usize
}

/// Even encoder frames for `n` tokens, spread over `candidates` and skipping
/// taken ones. `None` if the utterance is too crowded.
fn allocate(candidates: &[usize], n: usize, taken: &BTreeSet<usize>) -> Option<Vec<usize>> {
    let free: Vec<usize> = candidates.iter().copied().filter(|t| !taken.contains(t)).collect();
    if free.len() < n {
        return None;
    }
    let mut out: Vec<usize> = (0..n).map(|j| free[(2 * j + 1) * free.len() / (2 * n)]).collect();
    out.sort_unstable();
    out.dedup();
    (out.len() == n).then_some(out)
}

/// Features and references for `placed`, or `None` when the events cannot
/// be laid out readably (the caller redraws).
pub(crate) fn render(rng: &mut ChaCha8Rng, fc: &FeatureConfig, placed: &[Placed], sigs: &[Vec<f64>]) -> Result<Option<(FeatureSequence, Vec<ReferenceUtterance>)>> {
    let layout = fc.layout();
    let end = placed.iter().map(|p| p.end).fold(0.0, f64::max);
    let n_raw = (raw(end + 0.5) / STACK + 1) * STACK;

    let mut active = vec![0.0; n_raw];
    for p in placed {
        for a in &mut active[raw(p.start)..raw(p.end)] {
            *a += 1.0;
        }
    }
    let spans = segment_silence(&active, RAW_FRAME_SHIFT, 0.5, fc.vad.min_silence)?;

    // Utterances in serialization order: start, then speaker id, then end.
    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&placed[a], &placed[b]);
        pa.start.total_cmp(&pb.start).then_with(|| speaker_id(pa.speaker).cmp(&speaker_id(pb.speaker))).then_with(|| pa.end.total_cmp(&pb.end))
    });
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &u in &order {
        let r = raw(placed[u].start);
        let g = spans.iter().position(|s| s.start <= r && r < s.end).expect("utterance start is speech");
        groups.entry(g).or_default().push(u);
    }

    let content: Vec<TokenId> = (2..layout.vocab_size).collect();
    let mut events: BTreeMap<usize, Event> = BTreeMap::new();
    let mut tokens_of: Vec<Vec<TokenId>> = vec![Vec::new(); placed.len()];
    for members in groups.values() {
        let counts: Vec<usize> = members.iter().map(|_| rng.random_range(fc.tokens_per_utterance.0..=fc.tokens_per_utterance.1)).collect();
        let total: usize = counts.iter().sum();
        if total > content.len() {
            return Ok(None);
        }
        let mut words: Vec<TokenId> = content.choose_multiple(rng, total).copied().collect();
        let mut taken = BTreeSet::new();
        let mut prev: Option<(TokenId, usize)> = None;
        let mut last_frame = 0;
        for (&u, &n) in members.iter().zip(&counts) {
            let p = &placed[u];
            let lo = raw(p.start).div_ceil(STACK);
            let hi = raw(p.end) / STACK;
            let candidates: Vec<usize> = (lo + 1..hi.saturating_sub(1)).filter(|t| t % 2 == 0).collect();
            let Some(frames) = allocate(&candidates, n, &taken) else { return Ok(None) };
            let toks: Vec<TokenId> = words.drain(..n).collect();
            let first = frames[0];
            let mut key = match prev {
                None => EOS,
                Some((last_tok, last_spk)) => {
                    events.insert(first - 1, Event { token: SC, key: last_tok, speaker: last_spk });
                    SC
                }
            };
            for (&t, &tok) in frames.iter().zip(&toks) {
                taken.insert(t);
                events.insert(t, Event { token: tok, key, speaker: p.speaker });
                key = tok;
            }
            prev = Some((key, p.speaker));
            last_frame = *frames.last().expect("n >= 1");
            tokens_of[u] = toks;
        }
        if events.contains_key(&(last_frame + 1)) {
            return Ok(None);
        }
    }

    let dim = layout.feat_dim();
    let mut x = Matrix::zeros(n_raw, dim);
    for (f, &a) in active.iter().enumerate() {
        let row = x.row_mut(f);
        row[layout.energy()] = a + fc.energy_noise * rng.sample::<f64, _>(StandardNormal);
        for d in 0..fc.sig_dim {
            row[layout.sig(d)] = fc.background * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for (&t, e) in &events {
        for s in 0..STACK {
            let row = x.row_mut(t * STACK + s);
            if s == 0 {
                row[layout.token(e.token)] = 1.0;
                row[layout.key(e.key)] = 1.0;
            }
            for d in 0..fc.sig_dim {
                row[layout.sig(d)] = sigs[e.speaker][d] + fc.signature_noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    // Stored values are exactly representable in single precision.
    x.as_mut_slice().iter_mut().for_each(|v| *v = *v as f32 as f64);

    let references = order
        .iter()
        .map(|&u| ReferenceUtterance::new(speaker_id(placed[u].speaker), placed[u].start, placed[u].end, tokens_of[u].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((FeatureSequence::new(x, RAW_FRAME_SHIFT)?, references)))
}
