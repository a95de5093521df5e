use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid geometry: {field} {reason}")]
    InvalidGeometry { field: &'static str, reason: &'static str },
    #[error("slider map argument {argument} outside (-1, 1)")]
    Domain { argument: f64 },
    #[error("kinematic singularity (determinant {determinant:e})")]
    Singular { determinant: f64 },
    #[error("loop {loop_name} cannot assemble at this pose")]
    Assembly { loop_name: &'static str },
    #[error("transmission angle {angle} rad below the allowed floor")]
    PoorTransmission { angle: f64 },
    #[error("pinned angles leave the cross-section loop unsolvable")]
    OverconstrainedPin,
    #[error("contact distance d{index} is zero")]
    DivisionDomain { index: usize },
    #[error("target out of reach (arcsine argument {argument})")]
    OutOfReach { argument: f64 },
    #[error("trajectory sample {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of an iterative or linear solve (as opposed to bad inputs).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Numerics(NumericsError::InvalidSettings(_)) => false,
            Error::Numerics(_) | Error::Singular { .. } | Error::Assembly { .. } | Error::OverconstrainedPin => true,
            Error::PoorTransmission { .. } => true,
            Error::Trajectory { source, .. } => source.is_solver_failure(),
            Error::Domain { .. } | Error::DivisionDomain { .. } | Error::OutOfReach { .. } => true,
            Error::InvalidGeometry { .. } | Error::InvalidInput(_) => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
