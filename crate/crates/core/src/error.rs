use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("field/forms built on different meshes (id {expected} vs {found})")]
    MeshMismatch { expected: u64, found: u64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("principal boundary eigenvalue undefined: lambda_Omega = {lambda_omega} <= 1")]
    LambdaOmegaNotGreaterThanOne { lambda_omega: f64 },

    #[error("precondition on lambda_Omega violated: {0}")]
    PreconditionLambdaOmega(String),

    #[error("boundary value {value} below differentiability floor {floor} at eps = 0")]
    NonDifferentiableBoundary { value: f64, floor: f64 },

    #[error("field not in the admissible cone: {0}")]
    NotInCone(String),

    #[error("no constant Nehari member exists for these parameters: {0}")]
    NoConstantSolution(String),

    #[error("fibering map has no pair of roots for any seed (lambda too large)")]
    NoTwoRoots,

    #[error("iteration limit {max_iter} exceeded (residual {residual:.3e})")]
    MaxIterExceeded { max_iter: usize, residual: f64 },

    #[error("singular Jacobian encountered")]
    SingularJacobian,

    #[error("monotone iteration ordering violated at step {step}")]
    OrderingViolation { step: usize },

    #[error("continuation corrector diverged at step {step} (lambda = {lambda:.6e})")]
    CorrectorDiverged { step: usize, lambda: f64 },

    #[error("eigensolver failed to converge: {0}")]
    EigenFailed(String),

    #[error("no solution found: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
