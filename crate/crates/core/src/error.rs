//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("k = {k} out of range for {n} points (need 1 <= k <= n-1)")]
    KOutOfRange { k: usize, n: usize },

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {index} has all {k} nearest neighbors at distance zero")]
    DegenerateDuplicates { index: usize, k: usize },

    #[error("density value at index {index} is not positive ({value}); log scale requires strictly positive values")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("density is already on a log scale")]
    AlreadyLogScale,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("site {site} has zero median absolute deviation (constant signal)")]
    ZeroMad { site: usize },

    #[error("cut window of {window} samples does not fit a recording of {samples} samples")]
    WindowTooLarge { window: usize, samples: usize },

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("bad file format: {0}")]
    BadFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code for diagnostics, one per error family.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "E-DIM",
            Error::NonFinite { .. } => "E-FINITE",
            Error::EmptyInput(_) => "E-EMPTY",
            Error::KOutOfRange { .. } => "E-PARAM",
            Error::NonPositiveRadius(_) => "E-PARAM",
            Error::NonPositiveBandwidth(_) => "E-PARAM",
            Error::InvalidParameter(_) => "E-PARAM",
            Error::DegenerateDuplicates { .. } => "E-DEGENERATE",
            Error::NonPositiveDensity { .. } => "E-DENSITY",
            Error::AlreadyLogScale => "E-DENSITY",
            Error::LengthMismatch { .. } => "E-ALIGN",
            Error::ZeroMad { .. } => "E-SIGNAL",
            Error::WindowTooLarge { .. } => "E-PARAM",
            Error::EmptyCluster(_) => "E-EMPTY",
            Error::BadFormat(_) => "E-FORMAT",
            Error::Io(_) => "E-IO",
            Error::Csv(_) => "E-FORMAT",
            Error::Json(_) => "E-FORMAT",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
