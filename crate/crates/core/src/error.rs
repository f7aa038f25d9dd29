use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by detectors, IO, evaluation, and scene synthesis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("coordinate ({row}, {col}) outside {height}x{width} raster")]
    OutOfRange {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("mask must contain both anomaly and background pixels")]
    SingleClassMask,

    #[error("both detection maps have zero spectral norm")]
    NoSignal,

    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
