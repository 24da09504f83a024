use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlideError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point lies on the simplex boundary; the entropy mirror map is undefined there")]
    BoundaryPoint,

    #[error("composite prox needs at least one anchor")]
    NoAnchors,

    #[error("anchor is infeasible (violation {0:e})")]
    InfeasibleAnchor(f64),

    #[error("invalid anchor weight {0}")]
    InvalidWeight(f64),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("feasible set is unbounded")]
    Unbounded,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("schedule violates {0}")]
    InvalidSchedule(String),

    #[error("problem has no stochastic oracle")]
    MissingStochasticOracle,

    #[error("unknown problem family `{0}`")]
    UnknownFamily(String),

    #[error("could not certify optimality within tolerance {tol:e} (best certified gap {achieved:e})")]
    CertificationFailed { tol: f64, achieved: f64 },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl SlideError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        SlideError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        SlideError::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for SlideError {
    fn from(e: std::io::Error) -> Self {
        SlideError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SlideError>;
