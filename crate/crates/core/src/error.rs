use thiserror::Error;

use crate::integrator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The step-size controller could not meet the tolerance at the minimum step.
    /// Carries the trajectory accepted up to that point.
    #[error("step failure at tau = {tau}: step size {step:e} below minimum")]
    StepFailure {
        tau: f64,
        step: f64,
        partial: Option<Box<Trajectory>>,
    },

    #[error("degenerate linearization: {0}")]
    Degenerate(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}
