use thiserror::Error;

/// Errors produced by the discretization, the audits and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A nonlinearity or integrand returned a non-finite value.
    #[error("non-finite {what} at r = {radius:e}")]
    Evaluation { what: String, radius: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("no positive ratio J1/Phi found among the candidates")]
    NoPositiveRatio,

    #[error("singular linear system at row {0}")]
    SingularMatrix(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
