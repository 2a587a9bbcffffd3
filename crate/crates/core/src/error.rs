use thiserror::Error;

/// Errors raised by the estimation stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series too short: need at least {need} samples, have {have}")]
    TooShort { need: usize, have: usize },

    #[error("upsampling not supported here (source {source_rate} Hz, target {target_rate} Hz)")]
    Upsampling { source_rate: f64, target_rate: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty ROI: no valid depth pixels")]
    EmptyRoi,

    #[error("projection requires depth > 0, got {0} mm")]
    NonPositiveDepth(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("no overlap between candidate and reference series")]
    NoOverlap,

    #[error("not enough data: {0}")]
    NotEnoughData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
