use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("photon number {n} exceeds cutoff {cutoff}")]
    CutoffExceeded { n: usize, cutoff: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid input state: {0}")]
    InvalidInput(String),

    #[error("rejection sampler acceptance rate {rate:.3e} is below {min:.0e}; widen the proposal")]
    EnvelopeFailure { rate: f64, min: f64 },

    #[error("{method} fidelity estimation is not supported for this input: {reason}")]
    UnsupportedMethod { method: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
