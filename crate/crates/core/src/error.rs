use thiserror::Error;

/// Errors raised by the percolation, branching-process and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cap exceeded: {what} reached {value} (limit {limit})")]
    CapExceeded {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("vertex {0} lies outside the window slab")]
    OutOfSlab(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e}); \
         the matrix may be reducible, restrict to interior parameters"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
