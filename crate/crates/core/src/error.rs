use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The truncated basis cannot represent the requested state or evolution.
    #[error("truncation: {0}")]
    Truncation(String),

    #[error("odd cat state is undefined for |alpha| = {0:e}")]
    DegenerateCat(f64),

    #[error("Fock index {n} exceeds n_max = {n_max}")]
    Index { n: usize, n_max: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("grid too coarse: quadrature normalization {normalization} (expected {expected})")]
    GridTooCoarse { normalization: f64, expected: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("optimum is unbounded: {0}")]
    Unbounded(String),

    #[error("{count} eigenvalues lie within {tol:e} of 1; fixed point is not unique")]
    NonUniqueFixedPoint { count: usize, tol: f64 },

    #[error("step too coarse: transfer fidelity changed by {delta:e} on step halving")]
    StepTooCoarse { delta: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
