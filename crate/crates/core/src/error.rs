use thiserror::Error;

/// Error kinds shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angular integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("quadrature not converged for {what}: refinements differ by {diff:e} (tol {tol:e})")]
    QuadratureNotConverged { what: String, diff: f64, tol: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("support violation: f({v:?}) = {value:e} outside the support ball")]
    SupportViolation { v: [f64; 3], value: f64 },

    #[error("blow-up at t={time}: max |f_k| = {value:e}")]
    Blowup { time: f64, value: f64 },

    #[error("symmetry check failed at l={l:?}, m={m:?}: {detail}")]
    Symmetry { l: [i32; 3], m: [i32; 3], detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
