//! Word error counts and the concatenated minimum-permutation WER.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assignment::min_cost_assignment;
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
    }
}

/// Levenshtein alignment counts. Among equal-cost alignments the backtrace
/// prefers deletion, then insertion, then substitution.
pub fn edit_distance<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + sub);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && d[i - 1][j] + 1 == d[i][j] {
            counts.deletions += 1;
            i -= 1;
        } else if j > 0 && d[i][j - 1] + 1 == d[i][j] {
            counts.insertions += 1;
            j -= 1;
        } else {
            if reference[i - 1].as_ref() != hypothesis[j - 1].as_ref() {
                counts.substitutions += 1;
            }
            i -= 1;
            j -= 1;
        }
    }
    counts
}

/// Splits on whitespace.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpWerReport {
    pub wer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
    /// Hypothesis speaker to the reference speaker it was paired with.
    pub mapping: BTreeMap<String, String>,
}

/// Per-speaker transcripts: each speaker's utterances in time order.
pub type SpeakerTranscripts = BTreeMap<String, Vec<Vec<String>>>;

fn concat(t: &SpeakerTranscripts) -> Vec<(String, Vec<String>)> {
    t.iter().map(|(k, us)| (k.clone(), us.concat())).collect()
}

/// Pairwise error counts: rows are reference speakers, columns hypothesis
/// speakers, both padded with empty transcripts to a square.
fn pair_counts(reference: &[(String, Vec<String>)], hypothesis: &[(String, Vec<String>)]) -> Vec<Vec<EditCounts>> {
    let size = reference.len().max(hypothesis.len());
    let empty: Vec<String> = Vec::new();
    (0..size)
        .map(|i| {
            let r = reference.get(i).map_or(&empty, |x| &x.1);
            (0..size).map(|j| edit_distance(r, hypothesis.get(j).map_or(&empty, |x| &x.1))).collect()
        })
        .collect()
}

fn report(reference: &[(String, Vec<String>)], hypothesis: &[(String, Vec<String>)], counts: &[Vec<EditCounts>], assignment: &[usize]) -> CpWerReport {
    let mut total = EditCounts::default();
    let mut mapping = BTreeMap::new();
    for (i, &j) in assignment.iter().enumerate() {
        total += counts[i][j];
        if let (Some(r), Some(h)) = (reference.get(i), hypothesis.get(j)) {
            mapping.insert(h.0.clone(), r.0.clone());
        }
    }
    let reference_words: usize = reference.iter().map(|r| r.1.len()).sum();
    CpWerReport {
        wer: total.errors() as f64 / reference_words as f64,
        substitutions: total.substitutions,
        insertions: total.insertions,
        deletions: total.deletions,
        reference_words,
        mapping,
    }
}

fn prepare(reference: &SpeakerTranscripts, hypothesis: &SpeakerTranscripts) -> Result<(Vec<(String, Vec<String>)>, Vec<(String, Vec<String>)>)> {
    let r = concat(reference);
    if r.iter().all(|x| x.1.is_empty()) {
        bail!(Contract, "reference has no words");
    }
    Ok((r, concat(hypothesis)))
}

/// Concatenates each speaker's utterances, then pairs reference and
/// hypothesis speakers to minimise total errors. Unpaired speakers on either
/// side are scored against an empty transcript.
pub fn cpwer(reference: &SpeakerTranscripts, hypothesis: &SpeakerTranscripts) -> Result<CpWerReport> {
    let (r, h) = prepare(reference, hypothesis)?;
    let counts = pair_counts(&r, &h);
    let cost: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|c| c.errors() as f64).collect()).collect();
    let assignment: Vec<usize> = min_cost_assignment(&cost).into_iter().map(|j| j.expect("square table")).collect();
    Ok(report(&r, &h, &counts, &assignment))
}

/// The same quantity by trying every pairing. Exponential; for checking.
pub fn cpwer_brute_force(reference: &SpeakerTranscripts, hypothesis: &SpeakerTranscripts) -> Result<CpWerReport> {
    let (r, h) = prepare(reference, hypothesis)?;
    let counts = pair_counts(&r, &h);
    let size = counts.len();
    let mut perm: Vec<usize> = (0..size).collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        let errors: usize = perm.iter().enumerate().map(|(i, &j)| counts[i][j].errors()).sum();
        if best.as_ref().is_none_or(|b| errors < b.0) {
            best = Some((errors, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(report(&r, &h, &counts, &best.expect("one permutation").1))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
