use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("uniform-forcing rescaling is undefined for zero damping")]
    RescalingUndefined,

    #[error("second conserved quantity is undefined for zero damping")]
    ZeroDamping,

    #[error("numerical divergence: non-finite state at t = {time}")]
    Divergence { time: f64 },

    #[error(
        "Picard map is not a contraction (constant {constant:.4} >= 1); \
         try a horizon of at most {suggested_horizon:.6}"
    )]
    NotContractive { constant: f64, suggested_horizon: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    PicardNotConverged { iterations: usize, last_update: f64 },

    #[error("decay-rate fit failed: {0}")]
    FitFailed(String),

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
