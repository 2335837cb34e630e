use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    /// The adversarial construction could not reach its threshold.
    /// `last_feasible_m` is the largest block length for which it could.
    #[error(
        "construction failed at m = {failed_m} (last feasible m: {last_feasible_m:?}): {reason}"
    )]
    ConstructionFailed {
        failed_m: usize,
        last_feasible_m: Option<usize>,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
