use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent {value} at index {index} is outside the admissible range (finite and >= {min})")]
    ExponentOutOfRange { index: usize, value: f64, min: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input where a nonempty sequence is required")]
    Empty,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("floating-point overflow at index {index}")]
    Overflow { index: usize },

    #[error("invalid geometry: {0}")]
    GeometryInvalid(String),

    #[error("invalid partition: {0}")]
    PartitionInvalid(String),

    #[error("power iteration did not converge after {iterations} iterations (last relative change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("phantom side {0} is too small (minimum 16)")]
    SideTooSmall(usize),

    #[error("run logs cannot be compared: {0}")]
    MismatchedLogs(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures raised by the numerics rather than by inputs or files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Overflow { .. } | Error::NoConvergence { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
