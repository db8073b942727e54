//! Error types shared across the crate.
//!
//! Stable exit codes used by the CLI (documented in the README):
//! 0 success, 2 configuration parse error, 3 configuration range error,
//! 4 flow/numerics failure, 5 I/O failure.

use thiserror::Error;

/// Errors from radial-profile construction and pointwise geometry.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("grid too small: N = {0}, need N >= 16")]
    GridTooSmall(usize),
    #[error("positivity violation: metric eigenvalue {which} = {value:.6e} at y = {y:.6} (floor 1e-12)")]
    PositivityViolation { which: &'static str, value: f64, y: f64 },
    #[error("endpoint regularity violation: {0}")]
    EndpointRegularity(String),
    #[error("differentiation failure: non-finite derivative data at resolution N = {0}")]
    DifferentiationFailure(usize),
    #[error("eigenvalue solve failed on degenerate discretization: {0}")]
    EigenSolveFailure(String),
    #[error("invalid profile data: {0}")]
    InvalidProfile(String),
}

/// Errors from the affine-coordinate tensor oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("conditioning failure: finite-difference residual {residual:.3e} exceeds limit {limit:.3e}")]
    ConditioningFailure { residual: f64, limit: f64 },
    #[error("oracle point outside chart: {0}")]
    PointOutOfChart(String),
}

/// Errors from functional evaluation.
#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("functional index k = {k} out of range 0..={n}")]
    IndexOutOfRange { k: usize, n: usize },
    #[error("path too coarse: time-quadrature self-estimate {estimate:.3e} exceeds 1e-6")]
    PathTooCoarse { estimate: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors from the flow engine.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step rejection limit reached: {rejections} consecutive rejections at t = {t:.6}")]
    StepRejectionLimit { rejections: usize, t: f64 },
    #[error("gauge root not bracketed after widening: bracket [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    #[error("insufficient tail for decay fit: {0} samples (need >= 10)")]
    InsufficientTail(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Errors from configuration parsing and the run driver.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    ParseError(String),
    #[error("config range error: {0}")]
    RangeError(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Stable process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ParseError(_) => 2,
            CliError::RangeError(_) => 3,
            CliError::Flow(_) => 4,
            CliError::Io(_) => 5,
            CliError::Other(_) => 4,
        }
    }
}
