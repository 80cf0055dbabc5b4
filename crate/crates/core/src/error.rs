use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SleError>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum SleError {
    #[error("opinion constraint violated: {what} (residual {residual:e})")]
    Constraint { what: &'static str, residual: f64 },

    #[error("opinion is dogmatic (u = {uncertainty:e}); smooth it before mapping to a Dirichlet")]
    Dogmatic { uncertainty: f64 },

    #[error("cumulative fusion of two dogmatic opinions is undefined; smooth the operands first")]
    DegenerateFusion,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: parse error at record {index}: {message}")]
    Parse {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SleError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            SleError::Io { .. } => ErrorKind::Io,
            SleError::NonFinite { .. } | SleError::DegenerateFusion => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SleError::Io {
            path: path.into(),
            source,
        }
    }
}
