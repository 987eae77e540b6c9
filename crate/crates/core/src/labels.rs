//! Serialized training targets: speaker-based and utterance-based
//! first-in-first-out orderings of reference transcriptions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::{Specials, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceUtterance {
    pub speaker_id: String,
    pub start: f64,
    pub end: f64,
    pub tokens: Vec<TokenId>,
}

impl ReferenceUtterance {
    pub fn new(speaker_id: impl Into<String>, start: f64, end: f64, tokens: Vec<TokenId>) -> Result<Self> {
        let u = Self { speaker_id: speaker_id.into(), start, end, tokens };
        u.check()?;
        Ok(u)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.start < self.end) || !self.start.is_finite() || !self.end.is_finite() {
            bail!(Contract, "utterance of {} has bad times [{}, {}]", self.speaker_id, self.start, self.end);
        }
        if self.tokens.is_empty() {
            bail!(Contract, "utterance of {} at {} has no tokens", self.speaker_id, self.start);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Speaker,
    Utterance,
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speaker" => Ok(Self::Speaker),
            "utterance" => Ok(Self::Utterance),
            _ => Err(crate::Error::Config(format!("unknown label scheme `{s}` (expected speaker or utterance)"))),
        }
    }
}

/// Start time, then speaker id, then end time.
fn fifo_order(a: &ReferenceUtterance, b: &ReferenceUtterance) -> Ordering {
    a.start.total_cmp(&b.start).then_with(|| a.speaker_id.cmp(&b.speaker_id)).then_with(|| a.end.total_cmp(&b.end))
}

fn sorted(us: &[ReferenceUtterance]) -> Result<Vec<&ReferenceUtterance>> {
    for u in us {
        u.check()?;
    }
    let mut v: Vec<&ReferenceUtterance> = us.iter().collect();
    v.sort_by(|a, b| fifo_order(a, b));
    Ok(v)
}

/// Speakers in order of their first start; each speaker's utterances
/// concatenated in time order, `<sc>` between speakers, `<eos>` at the end.
pub fn build_speaker_fifo(us: &[ReferenceUtterance], specials: Specials) -> Result<Vec<TokenId>> {
    let mut groups: Vec<(&str, Vec<TokenId>)> = Vec::new();
    for u in sorted(us)? {
        match groups.iter_mut().find(|g| g.0 == u.speaker_id) {
            Some(g) => g.1.extend(&u.tokens),
            None => groups.push((&u.speaker_id, u.tokens.clone())),
        }
    }
    Ok(join(groups.into_iter().map(|g| g.1), specials))
}

/// Utterances in order of start, `<sc>` between every adjacent pair.
pub fn build_utterance_fifo(us: &[ReferenceUtterance], specials: Specials) -> Result<Vec<TokenId>> {
    Ok(join(sorted(us)?.into_iter().map(|u| u.tokens.clone()), specials))
}

pub fn build_labels(us: &[ReferenceUtterance], scheme: Scheme, specials: Specials) -> Result<Vec<TokenId>> {
    match scheme {
        Scheme::Speaker => build_speaker_fifo(us, specials),
        Scheme::Utterance => build_utterance_fifo(us, specials),
    }
}

fn join(pieces: impl Iterator<Item = Vec<TokenId>>, specials: Specials) -> Vec<TokenId> {
    let mut out = Vec::new();
    for (i, p) in pieces.enumerate() {
        if i > 0 {
            out.push(specials.sc);
        }
        out.extend(p);
    }
    out.push(specials.eos);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SP: Specials = Specials { sc: 0, eos: 1 };
    const A: TokenId = 10;
    const B: TokenId = 11;
    const C: TokenId = 12;
    const D: TokenId = 13;

    fn u(spk: &str, start: f64, tokens: &[TokenId]) -> ReferenceUtterance {
        ReferenceUtterance::new(spk, start, start + 0.5, tokens.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let us = vec![u("spk1", 0.0, &[A, B]), u("spk2", 1.0, &[C]), u("spk1", 2.0, &[D])];
        assert_eq!(build_speaker_fifo(&us, SP).unwrap(), vec![A, B, D, SP.sc, C, SP.eos]);
        assert_eq!(build_utterance_fifo(&us, SP).unwrap(), vec![A, B, SP.sc, C, SP.sc, D, SP.eos]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(build_speaker_fifo(&[], SP).unwrap(), vec![SP.eos]);
        assert_eq!(build_utterance_fifo(&[], SP).unwrap(), vec![SP.eos]);
        assert_eq!(build_speaker_fifo(&[u("x", 1.0, &[A, C])], SP).unwrap(), vec![A, C, SP.eos]);
        let same = vec![u("x", 0.0, &[A]), u("x", 1.0, &[B]), u("x", 2.0, &[C])];
        assert_eq!(build_utterance_fifo(&same, SP).unwrap(), vec![A, SP.sc, B, SP.sc, C, SP.eos]);
    }

    #[test]
    fn ties_break_on_speaker_id() {
        let us = vec![u("bob", 0.0, &[B]), u("alice", 0.0, &[A])];
        assert_eq!(build_speaker_fifo(&us, SP).unwrap(), vec![A, SP.sc, B, SP.eos]);
        let mut long = u("alice", 0.0, &[C]);
        long.end = 3.0;
        let us = vec![long, u("alice", 0.0, &[A])];
        assert_eq!(build_utterance_fifo(&us, SP).unwrap(), vec![A, SP.sc, C, SP.eos]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ReferenceUtterance::new("a", 1.0, 1.0, vec![A]).is_err());
        assert!(ReferenceUtterance::new("a", 0.0, 1.0, vec![]).is_err());
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
