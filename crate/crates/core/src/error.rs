use thiserror::Error;

/// Errors raised across the crate. Solver non-convergence is not an error; it
/// is reported through [`crate::equilibrium::EquilibriumReport`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("constraint violated: {0}")]
    Validation(String),

    #[error("cost table has no entry for distance {distance} (grid ends at {max})")]
    CostDomain { distance: f64, max: f64 },

    #[error("state space with {n} states exceeds the limit of {limit} for {what}")]
    Capacity { n: usize, limit: usize, what: &'static str },

    #[error("invalid message: {0}")]
    Message(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
