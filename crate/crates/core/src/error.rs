use thiserror::Error;

use crate::system::Qubit;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension for {what}: {value}")]
    InvalidDimension { what: &'static str, value: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("joint Hilbert space of dimension {dim} exceeds the limit of {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("singular detuning: {0}")]
    SingularDetuning(String),

    #[error("resonance singularity: {0}")]
    Singularity(String),

    #[error("invalid pulse schedule: {0}")]
    InvalidSchedule(String),

    #[error(
        "time step {dt:.3e} s exceeds the stability limit {limit:.3e} s \
         (set allow_large_dt to override)"
    )]
    StepTooLarge { dt: f64, limit: f64 },

    #[error(
        "integrator instability: trace drifted by {drift:.3e} at t = {time:.3e} s; \
         reduce the time step"
    )]
    IntegratorInstability { drift: f64, time: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("degenerate weight functions: the g and e trajectories never separate")]
    DegenerateWeights,

    #[error("no shots recorded for preparation {0}")]
    EmptyClass(Qubit),

    #[error("reference points coincide; assignment is undefined")]
    IdenticalReferences,

    #[error("fit failed after {iterations} iterations: {reason} (residual {residual:.4e})")]
    FitFailure {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{what} = {value} is outside its valid range")]
    OutOfRange { what: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
