//! Channel layout of the synthetic raw feature frames.
//!
//! Each raw frame carries four channel groups:
//!
//! | channels            | content                                        |
//! |---------------------|------------------------------------------------|
//! | `0 .. V`            | one-hot of the token spoken at this frame      |
//! | `V .. 2V`           | one-hot of the token that precedes it          |
//! | `2V .. 2V + D`      | speaker signature stream                       |
//! | `2V + D`            | energy (number of active talkers plus noise)   |

use serde::{Deserialize, Serialize};

/// Seconds between raw frames.
pub const RAW_FRAME_SHIFT: f64 = 0.01;
/// Raw frames stacked into one encoder frame.
pub const STACK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Full vocabulary size V, reserved symbols included.
    pub vocab_size: usize,
    /// Speaker signature dimension D.
    pub sig_dim: usize,
}

impl FeatureLayout {
    pub fn feat_dim(&self) -> usize {
        2 * self.vocab_size + self.sig_dim + 1
    }

    pub fn token(&self, id: usize) -> usize {
        id
    }

    pub fn key(&self, id: usize) -> usize {
        self.vocab_size + id
    }

    pub fn sig(&self, d: usize) -> usize {
        2 * self.vocab_size + d
    }

    pub fn energy(&self) -> usize {
        2 * self.vocab_size + self.sig_dim
    }
}
