//! Speaker-attributed recognition of overlapped speech with speaker counting
//! and clustering, label serialization for training targets, and scoring.

pub mod error;
pub mod exec;
pub mod layout;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod decoder;
pub mod diarize;
pub mod metrics;
pub mod labels;
pub mod simgen;
pub mod io;

pub use error::{Error, Result};
pub use exec::Execution;
