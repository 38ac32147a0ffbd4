use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Cholesky failed at every step of the jitter ladder.
    #[error("{what} is not positive definite even with diagonal jitter {jitter:e} (ill-conditioned kernel matrix)")]
    NotPositiveDefinite { what: &'static str, jitter: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("acquisition value at candidate {index} is {value}")]
    NonFiniteAcquisition { index: usize, value: f64 },

    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A checked theoretical invariant failed at run time.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),

    #[error("method {method}, trial {trial}: {source}")]
    Trial {
        method: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
