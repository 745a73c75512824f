use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or run parameter failed validation. `field` names the offending input.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("step index {index} out of range for a horizon of {n_steps} steps")]
    StepOutOfRange { index: usize, n_steps: usize },

    #[error("non-finite {quantity} in the backward step at n = {step}")]
    NonFinite { step: usize, quantity: &'static str },

    /// The value matrix produced at `step` is not positive definite. Starting from a
    /// positive-definite successor this cannot happen; from the semi-definite terminal
    /// matrix it happens when the delay penalty of the last action time is zero.
    #[error(
        "value matrix at n = {step} is not positive definite (p11 = {p11:e}, det = {det:e}); \
         positive definiteness propagates backward only from a positive-definite successor"
    )]
    NotPositiveDefinite { step: usize, p11: f64, det: f64 },

    #[error("negative Poisson rate {rate:e}")]
    NegativeRate { rate: f64 },

    #[error("minimizer stuck at the edge of the search bracket [{lo}, {hi}] after widening")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("grid does not cover the check region at n = {step}: node (q = {q}, lambda = {lambda}) has no valid value")]
    OffGrid { step: usize, q: f64, lambda: f64 },

    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    #[error(
        "pre-flight refused raw simulation: {aborted} of {pilot} pilot paths hit a negative \
         Poisson rate (limit 1e-6)"
    )]
    PreflightRefused { aborted: usize, pilot: usize },

    #[error("{aborted} of {total} paths aborted on a negative Poisson rate (limit 1e-6)")]
    AbortFraction { aborted: usize, total: usize },

    #[error("malformed table: {0}")]
    Table(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Table(e.to_string())
    }
}
