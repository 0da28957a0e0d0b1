use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
    #[error("bracket for the chemical potential not found after {0} expansions")]
    NoBracket(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
