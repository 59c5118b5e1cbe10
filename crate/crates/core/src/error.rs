use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Newton iteration for Gauss-Hermite node {index} did not converge")]
    QuadratureNonConvergence { index: usize },

    #[error("matrix is singular (zero pivot at row {row})")]
    Singular { row: usize },

    #[error("field has vanishing mass ({mass:e}); first moment undefined")]
    DegenerateMass { mass: f64 },

    #[error("time step underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("iteration oscillates without converging: {0}")]
    Oscillation(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
