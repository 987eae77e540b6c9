//! Utterance placement on the session timeline.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{MeetingConfig, MixtureConfig, Preset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Placed {
    pub speaker: usize,
    pub start: f64,
    pub end: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

/// Each utterance starts inside the previous one, at least `min_start_gap`
/// after it, and goes to a speaker who is silent by then. `None` when the
/// draw cannot satisfy the constraints.
pub(crate) fn mixture(rng: &mut ChaCha8Rng, cfg: &MixtureConfig) -> Option<Vec<Placed>> {
    let n_speakers = rng.random_range(cfg.n_speakers.0..=cfg.n_speakers.1);
    let n_utts = rng.random_range(cfg.n_utterances.0..=cfg.n_utterances.1);
    if n_utts < n_speakers {
        return None;
    }
    let mut last_end = vec![f64::NEG_INFINITY; n_speakers];
    let mut used = vec![false; n_speakers];
    let mut out: Vec<Placed> = Vec::with_capacity(n_utts);
    for i in 0..n_utts {
        let dur = uniform(rng, cfg.features.duration);
        let start = match out.last() {
            None => uniform(rng, (0.3, 0.6)),
            Some(p) => {
                let (lo, hi) = (p.start + cfg.min_start_gap, p.end - 0.1);
                if lo > hi {
                    return None;
                }
                uniform(rng, (lo, hi))
            }
        };
        let unused = used.iter().filter(|u| !**u).count();
        let must_introduce = n_utts - i == unused;
        let free: Vec<usize> = (0..n_speakers).filter(|&s| last_end[s] <= start && (!must_introduce || !used[s])).collect();
        let &speaker = free.as_slice().choose(rng)?;
        used[speaker] = true;
        last_end[speaker] = start + dur;
        out.push(Placed { speaker, start, end: start + dur });
    }
    Some(out)
}

/// Speaker order with no speaker twice in a row, if one exists near the draw.
fn speaker_order(rng: &mut ChaCha8Rng, counts: &[usize]) -> Option<Vec<usize>> {
    let mut seq: Vec<usize> = counts.iter().enumerate().flat_map(|(s, &c)| std::iter::repeat_n(s, c)).collect();
    seq.shuffle(rng);
    for i in 1..seq.len() {
        if seq[i] == seq[i - 1] {
            let j = (i + 1..seq.len()).find(|&j| seq[j] != seq[i - 1] && (j + 1 >= seq.len() || seq[j + 1] != seq[i]) && seq[j - 1] != seq[i])?;
            seq.swap(i, j);
        }
    }
    seq.windows(2).all(|w| w[0] != w[1]).then_some(seq)
}

pub(crate) fn meeting(rng: &mut ChaCha8Rng, cfg: &MeetingConfig) -> Option<Vec<Placed>> {
    let n_speakers = rng.random_range(cfg.n_speakers.0..=cfg.n_speakers.1);
    let counts: Vec<usize> = (0..n_speakers).map(|_| rng.random_range(cfg.utterances_per_speaker.0..=cfg.utterances_per_speaker.1)).collect();
    let order = speaker_order(rng, &counts)?;
    let durations: Vec<f64> = order.iter().map(|_| uniform(rng, cfg.features.duration)).collect();
    let mut out = Vec::with_capacity(order.len());
    let mut cursor = uniform(rng, (0.3, 0.6));
    match cfg.preset {
        Preset::ShortSilence | Preset::LongSilence => {
            let gap = if cfg.preset == Preset::ShortSilence { (0.1, 0.5) } else { (2.9, 3.0) };
            for (&speaker, &d) in order.iter().zip(&durations) {
                out.push(Placed { speaker, start: cursor, end: cursor + d });
                cursor += d + uniform(rng, gap);
            }
        }
        Preset::Overlap(pct) => {
            let r = pct as f64 / 100.0;
            let mut i = 0;
            while i < order.len() {
                let d1 = durations[i];
                out.push(Placed { speaker: order[i], start: cursor, end: cursor + d1 });
                let mut burst_end = cursor + d1;
                if i + 1 < order.len() {
                    // Overlap o makes o / (d1 + d2 - o) equal to r, unless the
                    // start gap or the second utterance's length caps it.
                    let d2 = durations[i + 1];
                    let o = (r * (d1 + d2) / (1.0 + r)).min(d1 - cfg.min_start_gap).min(d2 - 0.1).max(0.0);
                    let start = cursor + d1 - o;
                    out.push(Placed { speaker: order[i + 1], start, end: start + d2 });
                    burst_end = burst_end.max(start + d2);
                }
                cursor = burst_end + uniform(rng, (0.5, 1.0));
                i += 2;
            }
        }
    }
    Some(out)
}
