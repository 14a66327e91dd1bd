use thiserror::Error;

use crate::control::PidGains;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    /// The 2x2 acceleration system of the nonlinear plant is singular.
    #[error("degenerate plant configuration (determinant {det:e})")]
    DegenerateConfiguration { det: f64 },

    #[error("state became non-finite at t = {time} s")]
    Diverged { time: f64 },

    #[error("closed-loop simulation diverged at t = {time} s with gains {gains:?}")]
    SimulationDiverged { time: f64, gains: PidGains },

    #[error("Riccati integration did not converge after {steps} steps (|dP/dt| = {residual:e})")]
    CareNotConverged { steps: u64, residual: f64 },

    #[error("Riccati solution rejected: {0}")]
    InvalidCareSolution(String),

    #[error("step metrics undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("Q-table needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Capacity {
        required_bytes: usize,
        budget_bytes: usize,
    },

    #[error("training failed at epoch {epoch} (lambda = {lambda:e}): {reason}")]
    TrainingFailed {
        epoch: usize,
        lambda: f64,
        reason: String,
    },

    #[error("malformed policy network file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
