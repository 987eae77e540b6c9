use thiserror::Error;

/// Errors raised by the recognition, clustering and scoring routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes that do not line up (non-square input, mismatched lengths).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Input outside the mathematical domain of an operation (zero-norm vector, empty softmax).
    #[error("domain error: {0}")]
    Domain(String),

    /// Model or pipeline configuration that cannot be honoured.
    #[error("config error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// Malformed or incompatible file content.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
