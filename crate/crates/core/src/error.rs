use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum StsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("time ranges do not overlap")]
    DisjointRanges,

    #[error("insufficient overlap: {overlap_s:.3} s available, {required_s:.3} s required")]
    InsufficientOverlap { overlap_s: f64, required_s: f64 },

    #[error("requested instant {t} lies outside [{start}, {end}]")]
    Extrapolation { t: f64, start: f64, end: f64 },

    #[error("missing gyro stream for placement {0}")]
    MissingPlacement(String),

    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, StsError>;

impl StsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        StsError::InvalidParameter(msg.into())
    }
}
