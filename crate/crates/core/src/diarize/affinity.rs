use crate::error::{bail, Result};
use crate::linalg::{cosine, Matrix};

/// Cosine similarities between utterance embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: Matrix,
}

impl AffinityMatrix {
    /// Wraps a precomputed matrix; it must be square and symmetric.
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        if !values.is_square() {
            bail!(Dimension, "affinity must be square, got {}x{}", values.rows(), values.cols());
        }
        if values.asymmetry() > 1e-10 {
            bail!(Dimension, "affinity is not symmetric");
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Negative entries clamped to zero and the diagonal zeroed: the
    /// nonnegative edge weights a graph Laplacian needs.
    pub fn graph_weights(&self) -> Matrix {
        let mut w = self.values.clone();
        let n = w.rows();
        for i in 0..n {
            for j in 0..n {
                w[(i, j)] = if i == j { 0.0 } else { w[(i, j)].max(0.0) };
            }
        }
        w
    }
}

pub fn build_affinity<V: AsRef<[f64]>>(queries: &[V]) -> Result<AffinityMatrix> {
    let m = queries.len();
    if m == 0 {
        bail!(Contract, "affinity over zero embeddings");
    }
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        values[(i, i)] = 1.0;
        for j in 0..i {
            let c = cosine(queries[i].as_ref(), queries[j].as_ref())?;
            values[(i, j)] = c;
            values[(j, i)] = c;
        }
    }
    if m == 1 && crate::linalg::norm(queries[0].as_ref()) == 0.0 {
        bail!(Domain, "zero-norm embedding");
    }
    Ok(AffinityMatrix { values })
}
