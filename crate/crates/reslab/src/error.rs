use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    Numerics(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("singular jacobian: {0}")]
    SingularJacobian(String),

    #[error("implicit solve did not converge: residual {residual:e} after {iters} iterations")]
    ImplicitSolve { residual: f64, iters: usize },

    #[error("eigenvalue iteration did not converge")]
    Eigen,

    #[error("point is not an equilibrium: residual {0:e} exceeds 1e-8")]
    NotAnEquilibrium(f64),

    #[error("unknown problem id: {0}")]
    NotFound(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
