//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors produced by clustering, fitting, simulation and I/O operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A series (or window) is too short for the requested lag order.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// A scale estimate is exactly zero, so a scaled metric is undefined.
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    /// Fewer distinct feature vectors than requested clusters.
    #[error("duplicate collapse: {0}")]
    DuplicateCollapse(String),

    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

pub type Result<T> = std::result::Result<T, Error>;
