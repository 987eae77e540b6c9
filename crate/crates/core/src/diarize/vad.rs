//! Energy-threshold silence segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::FeatureSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VadConfig {
    /// Frames with energy below this are silence.
    pub threshold: f64,
    /// Shortest silence, in seconds, that splits two segments.
    pub min_silence: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self { threshold: 0.5, min_silence: 0.3 }
    }
}

/// Half-open frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl FrameSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A stretch of the session handed to the recognizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub features: FeatureSequence,
    /// Start of the segment within the session, in seconds.
    pub offset: f64,
}

/// Speech spans separated by silences of at least `min_silence`. Shorter
/// silences stay inside a span; spans start and end on speech frames.
pub fn segment_silence(energy: &[f64], frame_shift: f64, threshold: f64, min_silence: f64) -> Result<Vec<FrameSpan>> {
    if !(min_silence > 0.0) {
        bail!(Config, "minimum silence must be positive, got {min_silence}");
    }
    if !(frame_shift > 0.0) {
        bail!(Config, "frame shift must be positive, got {frame_shift}");
    }
    let min_frames = ((min_silence / frame_shift) - 1e-9).ceil().max(1.0) as usize;
    let mut spans = Vec::new();
    let mut current: Option<FrameSpan> = None;
    let mut silence_run = 0usize;
    for (t, &e) in energy.iter().enumerate() {
        if e >= threshold {
            match current.as_mut() {
                Some(span) if silence_run < min_frames => span.end = t + 1,
                _ => {
                    spans.extend(current.take());
                    current = Some(FrameSpan { start: t, end: t + 1 });
                }
            }
            silence_run = 0;
        } else {
            silence_run += 1;
        }
    }
    spans.extend(current);
    Ok(spans)
}

/// Cuts `features` at `spans`, optionally moving each start down to a
/// multiple of `align` frames so frame stacking stays in phase.
pub fn cut_segments(features: &FeatureSequence, spans: &[FrameSpan], align: usize) -> Result<Vec<Segment>> {
    let align = align.max(1);
    spans
        .iter()
        .map(|s| {
            let start = s.start - s.start % align;
            Ok(Segment { features: features.slice(start, s.end)?, offset: start as f64 * features.frame_shift() })
        })
        .collect()
}
