//! Independent checks of the generated sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MeetingConfig, MixtureConfig, Preset, SessionKind, SyntheticSession};
use crate::labels::ReferenceUtterance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    SpeakerCount,
    UtteranceCount,
    StartGap,
    /// Every utterance overlaps an utterance of another speaker.
    Overlap,
    SameSpeakerOverlap,
    Profiles,
    /// Layout required by a meeting preset.
    Preset,
}

impl Condition {
    pub fn number(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::SpeakerCount => "speaker count",
            Self::UtteranceCount => "utterance count",
            Self::StartGap => "start gap",
            Self::Overlap => "overlap with another speaker",
            Self::SameSpeakerOverlap => "same-speaker overlap",
            Self::Profiles => "profiles",
            Self::Preset => "preset layout",
        };
        write!(f, "condition {} ({name})", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// Indices into the session's references.
    pub utterances: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (utterances {:?})", self.condition, self.detail, self.utterances)
    }
}

fn overlaps(a: &ReferenceUtterance, b: &ReferenceUtterance) -> bool {
    a.start < b.end && b.start < a.end
}

fn in_range(x: usize, (lo, hi): (usize, usize)) -> bool {
    lo <= x && x <= hi
}

fn violation(condition: Condition, utterances: Vec<usize>, detail: String) -> Violation {
    Violation { condition, utterances, detail }
}

fn speakers(refs: &[ReferenceUtterance]) -> BTreeSet<&str> {
    refs.iter().map(|r| r.speaker_id.as_str()).collect()
}

fn start_gaps(refs: &[ReferenceUtterance], min_gap: f64, out: &mut Vec<Violation>) {
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            let gap = (refs[i].start - refs[j].start).abs();
            if gap < min_gap - 1e-9 {
                out.push(violation(Condition::StartGap, vec![i, j], format!("starts {gap:.3} s apart, need {min_gap}")));
            }
        }
    }
}

fn same_speaker(refs: &[ReferenceUtterance], out: &mut Vec<Violation>) {
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            if refs[i].speaker_id == refs[j].speaker_id && overlaps(&refs[i], &refs[j]) {
                out.push(violation(Condition::SameSpeakerOverlap, vec![i, j], format!("{} overlaps itself", refs[i].speaker_id)));
            }
        }
    }
}

fn profiles(s: &SyntheticSession, out: &mut Vec<Violation>) {
    let present: BTreeSet<&str> = speakers(&s.references);
    let relevant: BTreeSet<&str> = s.relevant_profiles.ids().collect();
    if present != relevant {
        out.push(violation(Condition::Profiles, Vec::new(), format!("relevant profiles {relevant:?} differ from speakers {present:?}")));
    }
    let shared: Vec<&str> = s.irrelevant_profiles.iter().map(|p| p.speaker_id.as_str()).filter(|id| relevant.contains(id)).collect();
    if !shared.is_empty() {
        out.push(violation(Condition::Profiles, Vec::new(), format!("profiles {shared:?} are both relevant and irrelevant")));
    }
}

/// Every broken mixture condition; empty when the session is valid.
pub fn verify_conditions(s: &SyntheticSession, cfg: &MixtureConfig) -> Vec<Violation> {
    let refs = &s.references;
    let mut out = Vec::new();
    let n_spk = speakers(refs).len();
    if !in_range(n_spk, cfg.n_speakers) {
        out.push(violation(Condition::SpeakerCount, Vec::new(), format!("{n_spk} speakers outside {:?}", cfg.n_speakers)));
    }
    if !in_range(refs.len(), cfg.n_utterances) {
        out.push(violation(Condition::UtteranceCount, Vec::new(), format!("{} utterances outside {:?}", refs.len(), cfg.n_utterances)));
    }
    start_gaps(refs, cfg.min_start_gap, &mut out);
    if refs.len() > 1 {
        for (i, r) in refs.iter().enumerate() {
            if !refs.iter().any(|o| o.speaker_id != r.speaker_id && overlaps(r, o)) {
                out.push(violation(Condition::Overlap, vec![i], format!("utterance of {} overlaps no other speaker", r.speaker_id)));
            }
        }
    }
    same_speaker(refs, &mut out);
    profiles(s, &mut out);
    let total = s.relevant_profiles.len() + s.irrelevant_profiles.len();
    let lo = cfg.profile_count.0.max(n_spk);
    if !(lo <= total && total <= cfg.profile_count.1.max(lo)) {
        out.push(violation(Condition::Profiles, Vec::new(), format!("{total} profiles outside [{lo}, {}]", cfg.profile_count.1)));
    }
    out
}

/// Every broken meeting condition; empty when the session is valid.
pub fn verify_meeting(s: &SyntheticSession, cfg: &MeetingConfig) -> Vec<Violation> {
    let refs = &s.references;
    let mut out = Vec::new();
    let mut per_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in refs.iter().enumerate() {
        per_speaker.entry(&r.speaker_id).or_default().push(i);
    }
    if !in_range(per_speaker.len(), cfg.n_speakers) {
        out.push(violation(Condition::SpeakerCount, Vec::new(), format!("{} speakers outside {:?}", per_speaker.len(), cfg.n_speakers)));
    }
    for (spk, us) in &per_speaker {
        if !in_range(us.len(), cfg.utterances_per_speaker) {
            out.push(violation(Condition::UtteranceCount, us.clone(), format!("{spk} has {} utterances", us.len())));
        }
    }
    start_gaps(refs, cfg.min_start_gap, &mut out);
    same_speaker(refs, &mut out);
    profiles(s, &mut out);
    if s.irrelevant_profiles.len() != cfg.example_profiles {
        out.push(violation(Condition::Profiles, Vec::new(), format!("{} example profiles, expected {}", s.irrelevant_profiles.len(), cfg.example_profiles)));
    }
    if s.kind != (SessionKind::Meeting { preset: cfg.preset }) {
        out.push(violation(Condition::Preset, Vec::new(), format!("session kind {:?} is not preset {}", s.kind, cfg.preset)));
    }
    if matches!(cfg.preset, Preset::ShortSilence | Preset::LongSilence) {
        for i in 0..refs.len() {
            for j in i + 1..refs.len() {
                if overlaps(&refs[i], &refs[j]) {
                    out.push(violation(Condition::Preset, vec![i, j], format!("overlap in preset {}", cfg.preset)));
                }
            }
        }
    }
    out
}

/// Time with two or more talkers over time with at least one.
pub fn overlap_ratio(refs: &[ReferenceUtterance]) -> f64 {
    let mut points: Vec<(f64, i32)> = refs.iter().flat_map(|r| [(r.start, 1), (r.end, -1)]).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut active, mut last, mut speech, mut overlap) = (0, 0.0, 0.0, 0.0);
    for (t, d) in points {
        let dt = t - last;
        if active >= 1 {
            speech += dt;
        }
        if active >= 2 {
            overlap += dt;
        }
        active += d;
        last = t;
    }
    if speech > 0.0 { overlap / speech } else { 0.0 }
}
