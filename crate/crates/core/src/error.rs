use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scale {scale} with edge factor {edge_factor} overflows the 64-bit edge counter")]
    SizeOverflow { scale: u32, edge_factor: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("edge ({u}, {v}) has a label outside [1, {n}]")]
    LabelOutOfRange { u: u64, v: u64, n: u64 },

    #[error("input is not sorted by start vertex: edge #{index} has u = {u} after u = {previous}")]
    Unsorted { index: u64, previous: u64, u: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense oracle refused: n = {n} exceeds the cap of {cap}; lower the scale")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("vector has zero 1-norm")]
    ZeroNorm,

    #[error("missing manifest {0}; run the previous stage first")]
    MissingManifest(PathBuf),

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("malformed manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }
}
