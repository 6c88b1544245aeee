use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site budget exceeded: (2*{l}+1)^{d} = {sites} sites > budget {budget}")]
    Capacity {
        d: usize,
        l: i64,
        sites: u128,
        budget: u128,
    },

    #[error("domain mismatch: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature truncation: {0}")]
    Truncation(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("numerical check failed: {what} (residual {residual:.3e}, tolerance {tol:.3e})")]
    Numerical {
        what: String,
        residual: f64,
        tol: f64,
    },

    #[error("chain diverged at step {step}: {what}")]
    Divergence { step: usize, what: String },

    #[error("statistical quality too low: {0}")]
    Statistical(String),

    #[error("argument out of tabulated range: {0}")]
    Range(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
