use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// Evaluation requested at or past the blow-up time of a closed-form solution.
    #[error("t = {t} is outside the existence interval [0, {blowup_time})")]
    Domain { t: f64, blowup_time: f64 },

    /// Carries the last valid node `(t, [f, g])`.
    #[error("integration failed after t = {t}: {reason}")]
    Integration { t: f64, last: [f64; 2], reason: String },

    /// A simulated field produced non-finite values; `t` is the time of the last valid state.
    #[error("field overflow after t = {t}")]
    Overflow { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
