use serde::{Deserialize, Serialize};

use super::affinity::AffinityMatrix;
use super::kmeans::{kmeans, KMeansConfig};
use super::nme::normalized_laplacian;
use crate::error::{bail, Result};
use crate::exec::Execution;
use crate::linalg::{norm, symmetric_eigen};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Cluster id per item, numbered by first appearance.
    pub labels: Vec<usize>,
}

/// Spectral embedding: the `k` eigenvectors of the smallest normalized
/// Laplacian eigenvalues, one row per item, each row scaled to unit length.
pub fn spectral_embedding(a: &AffinityMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let lap = normalized_laplacian(&a.graph_weights());
    let eig = symmetric_eigen(&lap)?;
    let m = a.len();
    Ok((0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|c| eig.eigenvectors[(i, c)]).collect();
            let n = norm(&row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
            row
        })
        .collect())
}

pub fn spectral_cluster(a: &AffinityMatrix, k: usize, seed: u64, exec: Execution) -> Result<ClusterResult> {
    let m = a.len();
    if k == 0 || k > m {
        bail!(Contract, "cannot form {k} clusters from {m} items");
    }
    if k == 1 {
        return Ok(ClusterResult { k, labels: vec![0; m] });
    }
    if k == m {
        return Ok(ClusterResult { k, labels: (0..m).collect() });
    }
    let rows = spectral_embedding(a, k)?;
    let fit = kmeans(&rows, k, &KMeansConfig { seed, ..Default::default() }, exec);
    let k = fit.labels.iter().max().map_or(0, |&l| l + 1);
    Ok(ClusterResult { k, labels: fit.labels })
}
