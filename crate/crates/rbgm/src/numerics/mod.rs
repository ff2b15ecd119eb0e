//! Shared numerical kernels: the dense tensor carrier, seeded RNG, scalar
//! root finding, and the few matrix factorizations everything else is built
//! on.

mod linalg;
mod rng;
mod roots;
mod tensor;

pub use linalg::{
    compensated_dot, polar_factor, solve_spd_tridiagonal, svd, CompensatedSum, Svd,
    RANK_RATIO_TOL, SVD_RESIDUAL_REL,
};
pub use rng::Rng;
pub use roots::{bracketed_scalar_root, positive_cubic_root, CUBIC_RESIDUAL_REL};
pub use tensor::AmbientTensor;

/// Pinned tolerances used across the library. The defaults are the
/// contractual values; tests assert against them.
#[derive(Clone, Copy, Debug)]
pub struct ToleranceConfig {
    /// Relative reconstruction residual allowed for the thin SVD.
    pub svd_residual_rel: f64,
    /// Singular value ratio below which inputs count as rank deficient.
    pub rank_ratio: f64,
    /// Relative residual for the positive cubic root.
    pub cubic_residual_rel: f64,
    /// Manifold feasibility residual.
    pub feasibility: f64,
    /// Relative threshold deciding a projected direction is numerically zero.
    pub degenerate_direction_rel: f64,
    /// Relative KKT residual required of subproblem solutions.
    pub kkt_rel: f64,
    /// Relative primal/dual residual at which the splitting solver stops.
    pub splitting_residual_rel: f64,
    /// Iteration cap for the splitting solver.
    pub splitting_max_iters: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            svd_residual_rel: SVD_RESIDUAL_REL,
            rank_ratio: RANK_RATIO_TOL,
            cubic_residual_rel: CUBIC_RESIDUAL_REL,
            feasibility: 1e-10,
            degenerate_direction_rel: 1e-14,
            kkt_rel: 1e-10,
            splitting_residual_rel: 1e-8,
            splitting_max_iters: 10_000,
        }
    }
}
