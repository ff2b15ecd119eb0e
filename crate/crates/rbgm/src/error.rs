use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by the library. Runtime conditions inside a solver
/// run (line-search exhaustion, non-finite values) are reported through
/// `RunStatus` instead; `Error` covers contract violations and numerical
/// breakdowns in individual operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("SVD did not converge")]
    SvdNonConvergence,

    #[error("input is rank deficient (singular value ratio {ratio:.3e} below threshold)")]
    RankDeficient { ratio: f64 },

    #[error("tridiagonal solve hit a near-zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("root is not bracketed after {doublings} bracket expansions")]
    RootNotBracketed { doublings: usize },

    #[error("scalar root solve produced a non-finite value")]
    NonFiniteRoot,

    #[error("point at index {index} violates the reference-function domain")]
    DomainViolation { index: usize },

    #[error("point is not feasible for the manifold (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("retraction left the manifold chart: {0}")]
    RetractionDomain(String),

    #[error("projection target is degenerate: {0}")]
    DegenerateProjection(String),

    #[error("subproblem is infeasible: {0}")]
    InfeasibleSubproblem(String),

    #[error(
        "splitting solver stopped with primal residual {primal:.3e}, dual residual {dual:.3e}"
    )]
    InexactSolve { primal: f64, dual: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
