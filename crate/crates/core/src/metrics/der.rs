//! Diarization error rate without a collar, overlap included.

use serde::{Deserialize, Serialize};

use super::assignment::min_cost_assignment;
use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSpeech {
    pub speaker_label: String,
    /// `(start, end)` in seconds. Overlapping intervals of one speaker count once.
    pub intervals: Vec<(f64, f64)>,
}

impl TimedSpeech {
    pub fn new(speaker_label: impl Into<String>, intervals: Vec<(f64, f64)>) -> Result<Self> {
        let speaker_label = speaker_label.into();
        if let Some(&(s, e)) = intervals.iter().find(|(s, e)| !(s < e) || !s.is_finite() || !e.is_finite()) {
            bail!(Contract, "speaker {speaker_label}: interval [{s}, {e}) is not well formed");
        }
        Ok(Self { speaker_label, intervals })
    }

    fn active(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(s, e)| s <= t && t < e)
    }
}

/// All components are fractions of total reference speech time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerReport {
    pub der: f64,
    pub miss: f64,
    pub false_alarm: f64,
    pub speaker_error: f64,
    /// Total reference speech, in seconds (summed over speakers).
    pub reference_time: f64,
}

/// Elementary pieces of the timeline: `(midpoint, duration)`.
type Pieces = Vec<(f64, f64)>;

fn discretized(ref_: &[TimedSpeech], hyp: &[TimedSpeech], resolution: f64) -> Pieces {
    let end = ref_.iter().chain(hyp).flat_map(|s| s.intervals.iter().map(|i| i.1)).fold(0.0, f64::max);
    let start = ref_.iter().chain(hyp).flat_map(|s| s.intervals.iter().map(|i| i.0)).fold(f64::INFINITY, f64::min).min(0.0);
    let first = (start / resolution).floor() as i64;
    let last = (end / resolution).ceil() as i64;
    (first..last).map(|i| ((i as f64 + 0.5) * resolution, resolution)).collect()
}

fn exact(ref_: &[TimedSpeech], hyp: &[TimedSpeech]) -> Pieces {
    let mut points: Vec<f64> = ref_.iter().chain(hyp).flat_map(|s| s.intervals.iter().flat_map(|&(a, b)| [a, b])).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect()
}

fn score(ref_: &[TimedSpeech], hyp: &[TimedSpeech], pieces: &Pieces) -> Result<DerReport> {
    let activity = |set: &[TimedSpeech]| -> Vec<Vec<bool>> { set.iter().map(|s| pieces.iter().map(|p| s.active(p.0)).collect()).collect() };
    let ra = activity(ref_);
    let ha = activity(hyp);
    let overlap: Vec<Vec<f64>> = ra
        .iter()
        .map(|r| ha.iter().map(|h| pieces.iter().enumerate().filter(|(t, _)| r[*t] && h[*t]).map(|(_, p)| p.1).sum()).collect())
        .collect();
    let mapping: Vec<Option<usize>> = if ref_.is_empty() || hyp.is_empty() {
        vec![None; ref_.len()]
    } else {
        min_cost_assignment(&overlap.iter().map(|row| row.iter().map(|o| -o).collect()).collect::<Vec<_>>())
    };

    let (mut total, mut miss, mut fa, mut spk) = (0.0, 0.0, 0.0, 0.0);
    for (t, &(_, dur)) in pieces.iter().enumerate() {
        let n_ref = ra.iter().filter(|r| r[t]).count() as f64;
        let n_hyp = ha.iter().filter(|h| h[t]).count() as f64;
        let correct = mapping.iter().enumerate().filter(|(r, h)| h.is_some_and(|h| ra[*r][t] && ha[h][t])).count() as f64;
        total += dur * n_ref;
        miss += dur * (n_ref - n_hyp).max(0.0);
        fa += dur * (n_hyp - n_ref).max(0.0);
        spk += dur * (n_ref.min(n_hyp) - correct);
    }
    if total <= 0.0 {
        bail!(Contract, "reference timeline has no speech");
    }
    let (miss, false_alarm, speaker_error) = (miss / total, fa / total, spk / total);
    Ok(DerReport { der: miss + false_alarm + speaker_error, miss, false_alarm, speaker_error, reference_time: total })
}

/// DER on a timeline sampled every `resolution` seconds (a frame counts as
/// active when its midpoint is covered). Speakers are paired to maximise
/// overlap.
pub fn der(reference: &[TimedSpeech], hypothesis: &[TimedSpeech], resolution: f64) -> Result<DerReport> {
    if !(resolution > 0.0) {
        bail!(Config, "DER resolution must be positive, got {resolution}");
    }
    score(reference, hypothesis, &discretized(reference, hypothesis, resolution))
}

/// DER by exact interval arithmetic.
pub fn der_exact(reference: &[TimedSpeech], hypothesis: &[TimedSpeech]) -> Result<DerReport> {
    score(reference, hypothesis, &exact(reference, hypothesis))
}
