use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("every input vector is (numerically) zero")]
    AllZero,

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid rank {rank} for ambient dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid number of clusters k={k} for n={n} points")]
    InvalidK { k: usize, n: usize },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("net is empty")]
    EmptyNet,

    #[error("function pool is empty")]
    EmptyPool,

    #[error("sample size {n} exceeds dataset size {size}")]
    SampleTooLarge { n: usize, size: usize },

    #[error("fit is underdetermined: {0}")]
    Underdetermined(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: row has {actual} columns, expected {expected}")]
    InconsistentWidth {
        path: PathBuf,
        line: usize,
        expected: usize,
        actual: usize,
    },

    #[error("checksum mismatch for {url}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        url: String,
        expected: String,
        actual: String,
    },

    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
