use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is singular: zero pivot at index {pivot}")]
    Singular { pivot: usize },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("{what} did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("line search failed at outer iteration {iteration}: step {step:e} below 1e-14 (gradient norm {grad_norm:e})")]
    LineSearch {
        iteration: usize,
        step: f64,
        grad_norm: f64,
    },
    #[error("not a verified local minimizer: smallest reduced Hessian eigenvalue {min_eig:e}")]
    NotMinimizer { min_eig: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dense path limited to stacked dimension {threshold}, got {dim}; use the randomized solver")]
    DenseThresholdExceeded { dim: usize, threshold: usize },
    #[error("partition sets are not mutually orthogonal in the parameter weighting (coupling {coupling:e})")]
    NonOrthogonalPartition { coupling: f64 },
    #[error("direction has zero norm")]
    ZeroDirection,
}
