//! Utterance start/end times from attention rows.

use crate::error::{bail, Result};

/// Attention-weighted frame index `Σ_t α_t·t` (0-based).
pub fn weighted_frame_index(alpha: &[f64]) -> f64 {
    alpha.iter().enumerate().map(|(t, a)| a * t as f64).sum()
}

/// Start and end of an utterance from the attention rows of its content
/// tokens: `max(0, f_min·T_f − T_m)` and `f_max·T_f + T_m`, both shifted by
/// `offset`.
pub fn estimate_boundaries<R: AsRef<[f64]>>(alpha_rows: &[R], frame_shift: f64, margin: f64, offset: f64) -> Result<(f64, f64)> {
    if alpha_rows.is_empty() {
        bail!(Contract, "cannot place an utterance with no content tokens");
    }
    if !(frame_shift > 0.0) || !(margin >= 0.0) || !(offset >= 0.0) {
        bail!(Config, "frame shift must be positive, margin and offset non-negative");
    }
    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    for (n, row) in alpha_rows.iter().enumerate() {
        let row = row.as_ref();
        let sum: f64 = row.iter().sum();
        if row.is_empty() || row.iter().any(|a| !(*a >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            bail!(Contract, "attention row {n} is not a probability vector");
        }
        let f = weighted_frame_index(row);
        f_min = f_min.min(f);
        f_max = f_max.max(f);
    }
    Ok(((f_min * frame_shift - margin).max(0.0) + offset, f_max * frame_shift + margin + offset))
}

/// `|estimated − actual|`.
pub fn speaker_count_error(estimated: usize, actual: usize) -> f64 {
    estimated.abs_diff(actual) as f64
}

/// Mean of per-session speaker counting errors; `None` for no sessions.
pub fn mean_speaker_count_error(pairs: &[(usize, usize)]) -> Option<f64> {
    (!pairs.is_empty()).then(|| pairs.iter().map(|&(e, a)| speaker_count_error(e, a)).sum::<f64>() / pairs.len() as f64)
}
