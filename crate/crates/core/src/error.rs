use thiserror::Error;

use crate::dynamics::{Coords, Trajectory};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    Spec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("coordinate tag mismatch: expected {expected:?}, got {got:?}")]
    TagMismatch { expected: Coords, got: Coords },

    #[error("coordinate singularity: {0}")]
    CoordinateSingularity(String),

    #[error("singular potential: {0}")]
    SingularPotential(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("parameter window violated: {gate}")]
    Range { gate: String },

    #[error("{0}")]
    Integration(Box<IntegrationFailure>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn range(gate: impl Into<String>) -> Self {
        Error::Range { gate: gate.into() }
    }
}

/// Why an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    BlowUp,
    StepUnderflow,
    NonFinite,
    TooManySteps,
    Evaluation,
}

/// An integration that terminated before `t_end`. The samples recorded up to
/// the failure are kept in `partial`.
#[derive(Debug)]
pub struct IntegrationFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub message: String,
    pub partial: Trajectory,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "integration stopped at t = {}: {:?}: {}",
            self.t, self.kind, self.message
        )
    }
}
