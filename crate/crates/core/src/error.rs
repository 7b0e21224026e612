use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error at row {row}: {reason}")]
    Validation { row: usize, reason: String },

    #[error("invalid embedding set: {0}")]
    InvalidSet(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("size error: requested {requested} samples from a set of {available}")]
    Size { requested: usize, available: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("degenerate space: {0}")]
    DegenerateSpace(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size guard: n = {n} exceeds the brute-force limit of {limit}")]
    Guard { n: usize, limit: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("encoder `{encoder}`: {source}")]
    Pool {
        encoder: String,
        #[source]
        source: Box<Error>,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error stems from user-supplied input rather than a
    /// failure inside the library. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { source, .. } => matches!(
                source.kind(),
                std::io::ErrorKind::NotFound
                    | std::io::ErrorKind::PermissionDenied
                    | std::io::ErrorKind::UnexpectedEof
                    | std::io::ErrorKind::InvalidData
            ),
            Error::Pool { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
