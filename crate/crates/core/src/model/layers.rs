//! Building blocks of the recognizer: affine maps, recurrent cells and a
//! same-padded 1-D convolution over time.

use rand::Rng;

use crate::error::{bail, Result};
use crate::linalg::{sigmoid, Matrix};

/// Uniform entries in `[-scale, scale]`.
pub(crate) fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("finite by construction")
}

pub(crate) fn random_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Matrix::zeros(output, input), bias: vec![0.0; output] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, input: usize, output: usize, scale: f64) -> Self {
        Self { weight: random_matrix(rng, output, input, scale), bias: random_vec(rng, output, scale) }
    }

    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            bail!(Config, "bias of length {} for a {}-row weight", bias.len(), weight.rows());
        }
        Ok(Self { weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        self.weight.matvec_acc(x, &mut out);
        out
    }
}

/// LSTM cell. Gate blocks are stacked in the order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { w_ih: Matrix::zeros(4 * hidden, input), w_hh: Matrix::zeros(4 * hidden, hidden), bias: vec![0.0; 4 * hidden] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, input: usize, hidden: usize, scale: f64) -> Self {
        Self {
            w_ih: random_matrix(rng, 4 * hidden, input, scale),
            w_hh: random_matrix(rng, 4 * hidden, hidden, scale),
            bias: random_vec(rng, 4 * hidden, scale),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    pub(crate) fn check(&self, name: &str) -> Result<()> {
        let h = self.hidden_dim();
        if self.w_hh.rows() != 4 * h || self.w_ih.rows() != 4 * h || self.bias.len() != 4 * h {
            bail!(Config, "{name}: inconsistent LSTM gate shapes");
        }
        Ok(())
    }

    /// One step; returns the new `(h, c)`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim();
        let mut z = self.bias.clone();
        self.w_ih.matvec_acc(x, &mut z);
        self.w_hh.matvec_acc(h, &mut z);
        let mut h_new = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        for j in 0..n {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[n + j]);
            let g = z[2 * n + j].tanh();
            let o = sigmoid(z[3 * n + j]);
            c_new[j] = f * c[j] + i * g;
            h_new[j] = o * c_new[j].tanh();
        }
        (h_new, c_new)
    }
}

/// Single-layer tanh RNN run over a whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmanRnn {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Vec<f64>,
}

impl ElmanRnn {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { w_ih: Matrix::zeros(hidden, input), w_hh: Matrix::zeros(hidden, hidden), bias: vec![0.0; hidden] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, input: usize, hidden: usize, scale: f64) -> Self {
        Self {
            w_ih: random_matrix(rng, hidden, input, scale),
            w_hh: random_matrix(rng, hidden, hidden, scale),
            bias: random_vec(rng, hidden, scale),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    /// Maps a `T × input` sequence to `T × hidden`.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let n = self.hidden_dim();
        let mut out = Matrix::zeros(x.rows(), n);
        let mut h = vec![0.0; n];
        for t in 0..x.rows() {
            let mut z = self.bias.clone();
            self.w_ih.matvec_acc(x.row(t), &mut z);
            self.w_hh.matvec_acc(&h, &mut z);
            z.iter_mut().for_each(|v| *v = v.tanh());
            out.row_mut(t).copy_from_slice(&z);
            h = z;
        }
        out
    }
}

/// 1-D convolution over time with "same" zero padding. `weight` holds
/// `out_channels` rows of `in_channels × width` taps, tap-major within a
/// channel: entry `[o, i * width + w]` multiplies input channel `i` at time
/// offset `w - width / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub width: usize,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, width: usize) -> Self {
        Self { weight: Matrix::zeros(out_channels, in_channels * width), bias: vec![0.0; out_channels], width }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, in_channels: usize, out_channels: usize, width: usize, scale: f64) -> Self {
        Self {
            weight: random_matrix(rng, out_channels, in_channels * width, scale),
            bias: random_vec(rng, out_channels, scale),
            width,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.cols() / self.width
    }

    pub fn out_channels(&self) -> usize {
        self.weight.rows()
    }

    pub(crate) fn check(&self, name: &str) -> Result<()> {
        if self.width == 0 || self.width % 2 == 0 {
            bail!(Config, "{name}: convolution width must be odd, got {}", self.width);
        }
        if self.weight.cols() % self.width != 0 || self.bias.len() != self.weight.rows() {
            bail!(Config, "{name}: inconsistent convolution shapes");
        }
        Ok(())
    }

    /// Weight for output `o`, input channel `i`, relative time offset `offset`.
    pub fn tap_mut(&mut self, o: usize, i: usize, offset: isize) -> &mut f64 {
        let w = (offset + (self.width / 2) as isize) as usize;
        &mut self.weight[(o, i * self.width + w)]
    }

    /// Maps `T × in_channels` to `T × out_channels`.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let (t_len, cin, cout) = (x.rows(), self.in_channels(), self.out_channels());
        let half = (self.width / 2) as isize;
        let mut out = Matrix::zeros(t_len, cout);
        for t in 0..t_len {
            let row = out.row_mut(t);
            row.copy_from_slice(&self.bias);
            for w in 0..self.width {
                let src = t as isize + w as isize - half;
                if src < 0 || src >= t_len as isize {
                    continue;
                }
                let xs = x.row(src as usize);
                for (o, r) in row.iter_mut().enumerate() {
                    let wrow = self.weight.row(o);
                    let mut acc = 0.0;
                    for i in 0..cin {
                        acc += wrow[i * self.width + w] * xs[i];
                    }
                    *r += acc;
                }
            }
        }
        out
    }

    /// Single-channel input given as a plain vector.
    pub fn forward_signal(&self, signal: &[f64]) -> Matrix {
        let x = Matrix::from_vec(signal.len(), 1, signal.to_vec()).expect("shape matches");
        self.forward(&x)
    }
}
