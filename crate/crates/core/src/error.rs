use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter arity mismatch: expected {expected}, got {got}")]
    ParameterArity { expected: usize, got: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("capacity exceeded: {requested} qubits requested, maximum is {max}")]
    Capacity { requested: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shot noise already applied to this kernel matrix ({shots} shots)")]
    DoubleNoise { shots: u64 },

    #[error("invalid sparsity pattern: {0}")]
    Pattern(String),

    /// Carries the best iterate reached before the iteration budget ran out.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Box<DMatrix<f64>>,
    },

    #[error("degenerate denominator: unknown entries of the reference matrix are all zero")]
    DegenerateDenominator,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::DegenerateDenominator | Error::Numerical(_)
        )
    }
}
