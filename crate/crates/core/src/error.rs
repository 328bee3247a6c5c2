use thiserror::Error;

/// Errors raised by path construction, integration and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time {0} is not a grid point")]
    NotGridPoint(f64),
    #[error("variation exponent must be a finite number >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("grid of length {len} is too long for exhaustive enumeration (max {max})")]
    TooLong { len: usize, max: usize },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("controlled path does not reference this rough path")]
    ReferenceMismatch,
    #[error("solution left the finite domain at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },
    #[error("CFL condition violated: time step {dt:.3e} exceeds stable step {suggested:.3e}")]
    Cfl { dt: f64, suggested: f64 },
    #[error("operation requires a geometric rough path")]
    NotGeometric,
    #[error("second level violates Chen's relation (residual {0:.3e})")]
    ChenViolation(f64),
    #[error("second level is not geometric (symmetry residual {0:.3e})")]
    SymmetryViolation(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
