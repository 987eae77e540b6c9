//! Speaker counting by the normalized maximum eigengap.
//!
//! For each neighbourhood size `p` the affinity is binarized row-wise (keep
//! the `p` strongest positive entries), symmetrized, and the eigenvalues of
//! its normalized Laplacian are inspected. The largest gap among the smallest
//! eigenvalues, divided by the largest eigenvalue, measures how cleanly the
//! graph splits; the `p` with the best gap-to-`p` ratio wins and its gap
//! position is the speaker count.

use serde::{Deserialize, Serialize};

use super::affinity::AffinityMatrix;
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::linalg::{symmetric_eigen, Matrix};

const EPS: f64 = 1e-10;

/// What the search saw at one neighbourhood size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmeCandidate {
    pub p: usize,
    pub k: usize,
    /// Largest eigengap over the largest eigenvalue.
    pub normalized_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmeOutcome {
    pub k: usize,
    pub p: usize,
    pub candidates: Vec<NmeCandidate>,
}

/// Symmetric normalized Laplacian `I − D^{-1/2} W D^{-1/2}`; isolated nodes
/// get an all-zero row.
pub fn normalized_laplacian(w: &Matrix) -> Matrix {
    let n = w.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = w.row(i).iter().sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        })
        .collect();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            l[(i, j)] = if i == j { if inv_sqrt[i] > 0.0 { 1.0 - off } else { 0.0 } } else { -off };
        }
    }
    l
}

/// Keeps the `p` largest positive entries of every row (ties to the lower
/// column), then symmetrizes as `(B + Bᵀ) / 2`.
pub fn binarize_top_p(w: &Matrix, p: usize) -> Matrix {
    let n = w.rows();
    let mut b = Matrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i && w[(i, j)] > 0.0));
        order.sort_by(|&a, &c| w[(i, c)].total_cmp(&w[(i, a)]).then(a.cmp(&c)));
        for &j in order.iter().take(p) {
            b[(i, j)] = 1.0;
        }
    }
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = 0.5 * (b[(i, j)] + b[(j, i)]);
        }
    }
    s
}

/// Connected components of the graph with an edge wherever `w > 0`.
pub fn component_count(w: &Matrix) -> usize {
    let n = w.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut count = n;
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] > 0.0 || w[(j, i)] > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    count -= 1;
                }
            }
        }
    }
    count
}

fn evaluate(w: &Matrix, p: usize, window: usize) -> Result<NmeCandidate> {
    let lap = normalized_laplacian(&binarize_top_p(w, p));
    let eig = symmetric_eigen(&lap)?;
    let lambda = &eig.eigenvalues;
    let mut best_gap = 0.0;
    let mut k = 0;
    for i in 1..=window {
        let gap = lambda[i] - lambda[i - 1];
        if gap > best_gap + EPS {
            best_gap = gap;
            k = i;
        }
    }
    let lambda_max = lambda.last().copied().unwrap_or(0.0).max(0.0);
    Ok(NmeCandidate { p, k, normalized_gap: best_gap / (lambda_max + EPS) })
}

/// Full search, returning the chosen `(p, k)` and every candidate.
pub fn nme_search(a: &AffinityMatrix, max_speakers: usize, exec: Execution) -> Result<NmeOutcome> {
    let max_speakers = max_speakers.max(1);
    let m = a.len();
    if m <= 1 {
        return Ok(NmeOutcome { k: m.max(1).min(max_speakers), p: 0, candidates: Vec::new() });
    }
    let w = a.graph_weights();
    let window = (m - 1).min(max_speakers + 1);
    let ps: Vec<usize> = (1..m).collect();
    let candidates = exec::map(exec, &ps, |&p| evaluate(&w, p, window)).into_iter().collect::<Result<Vec<_>>>()?;

    let mut best: Option<&NmeCandidate> = None;
    for c in &candidates {
        let ratio = c.normalized_gap / c.p as f64;
        if best.is_none_or(|b| ratio > b.normalized_gap / b.p as f64 + EPS) {
            best = Some(c);
        }
    }
    let chosen = best.expect("at least one neighbourhood size");
    let k = if chosen.k == 0 { m } else { chosen.k };
    Ok(NmeOutcome { k: k.min(max_speakers).max(1), p: chosen.p, candidates })
}

/// Estimated speaker count in `1 ..= min(max_speakers, M)`.
pub fn count_speakers_nme(a: &AffinityMatrix, max_speakers: usize) -> Result<usize> {
    Ok(nme_search(a, max_speakers, Execution::Sequential)?.k)
}
