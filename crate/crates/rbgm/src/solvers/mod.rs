//! Outer optimization loops.
//!
//! Deterministic methods: retraction-based Bregman descent (`RRbgd`),
//! projection-based Bregman descent with optional normal correction
//! (`PRbgd`, `PRbgdC`), and Riemannian steepest descent baselines (`Rsd`,
//! `RsdAda`). Stochastic variants (`SRRbgd`, `SPRbgd`) replace the exact
//! gradient by a minibatch estimate and run at a fixed stepsize.
//!
//! All methods share the same skeleton: compute a descent direction from
//! the current gradient, select a stepsize (backtracking for the
//! deterministic methods), move via retraction or projection, and log one
//! record per accepted iteration.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bregman::ReferenceFunction;
use crate::error::{Error, Result};
use crate::manifolds::{Manifold, ManifoldPoint};
use crate::problems::{ProblemOracle, StochasticOracle};
use crate::subproblem::{self, SubproblemSpec};

/// Stepsize shrink budget per iteration.
pub const MAX_LINESEARCH_SHRINKS: usize = 60;
/// Sufficient-decrease constant for the steepest-descent baselines.
pub const RSD_ARMIJO_C: f64 = 1e-4;
/// Forward-tracking budget of the adaptive baseline.
pub const RSD_MAX_GROWTHS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RRbgd,
    PRbgd,
    PRbgdC,
    SRRbgd,
    SPRbgd,
    Rsd,
    RsdAda,
}

impl Method {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::SRRbgd | Method::SPRbgd)
    }

    pub fn is_bregman(self) -> bool {
        !matches!(self, Method::Rsd | Method::RsdAda)
    }

    /// Display name used in reports and tables.
    pub fn name(self) -> &'static str {
        match self {
            Method::RRbgd => "R-RBGD",
            Method::PRbgd => "P-RBGD",
            Method::PRbgdC => "P-RBGD-C",
            Method::SRRbgd => "S-R-RBGD",
            Method::SPRbgd => "S-P-RBGD",
            Method::Rsd => "RSD",
            Method::RsdAda => "RSD-Ada",
        }
    }
}

fn default_rho() -> f64 {
    0.5
}
fn default_alpha0() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    50_000
}
fn default_grad_tol() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative-smoothness coefficient of the Bregman model; ignored by
    /// the steepest-descent baselines (and may be omitted for them in
    /// config files).
    #[serde(default)]
    pub gamma: f64,
    /// Linesearch shrink factor.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Initial trial stepsize.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    /// Normal-correction bound for `PRbgdC`; the correction `-v^N` needs
    /// `tau >= 1`.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stationarity tolerance on the Riemannian gradient norm (smooth
    /// problems) or on the direction norm (composite problems).
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Minibatch size, stochastic methods only.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Disables the linesearch and accepts this stepsize unconditionally.
    /// Required for stochastic methods.
    #[serde(default)]
    pub fixed_alpha: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(method: Method, gamma: f64) -> Self {
        Self {
            method,
            gamma,
            rho: default_rho(),
            alpha0: default_alpha0(),
            tau: default_tau(),
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            batch_size: default_batch(),
            fixed_alpha: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in (0,1), got {}",
                self.rho
            )));
        }
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be >= 0, got {}",
                self.tau
            )));
        }
        if self.method == Method::PRbgdC && self.tau < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "the normal correction -v^N requires tau >= 1, got {}",
                self.tau
            )));
        }
        if self.method.is_bregman() && (!(self.gamma > 0.0) || !self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive for Bregman methods, got {}",
                self.gamma
            )));
        }
        if let Some(a) = self.fixed_alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "fixed_alpha must be positive, got {a}"
                )));
            }
        }
        if self.method.is_stochastic() {
            if self.fixed_alpha.is_none() {
                return Err(Error::InvalidConfig(
                    "stochastic methods take a fixed stepsize".into(),
                ));
            }
            if self.batch_size == 0 {
                return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
    LinesearchFailure,
    NumericalError,
}

/// State at iteration `t` plus the accepted step that produced `x_{t+1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Smooth objective value at `x_t`.
    pub f_value: f64,
    /// Nonsmooth term value at `x_t` (zero for smooth problems).
    pub g_value: f64,
    /// Riemannian gradient norm at `x_t`; absent for composite problems.
    pub grad_norm: Option<f64>,
    /// `||v_t||` of the chosen direction.
    pub direction_norm: f64,
    /// Accepted stepsize.
    pub alpha: f64,
    /// Candidate evaluations spent by the stepsize selection.
    pub linesearch_trials: usize,
    pub wall_ns: u64,
}

impl IterationRecord {
    pub fn objective(&self) -> f64 {
        self.f_value + self.g_value
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PointDigest {
    pub feasibility_residual: f64,
    pub checksum: u64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: SolverConfig,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// Smooth objective at the final iterate.
    pub final_f: f64,
    /// Nonsmooth term at the final iterate.
    pub final_g: f64,
    /// Riemannian gradient norm at the final iterate (smooth problems).
    pub final_grad_norm: Option<f64>,
    /// Norm of the last computed direction, when one was computed.
    pub final_direction_norm: Option<f64>,
    pub iterations: usize,
    pub digest: PointDigest,
    /// Largest feasibility residual observed across accepted iterates.
    pub max_feasibility_residual: f64,
    pub wall_ns_total: u64,
    pub final_point: ManifoldPoint,
}

impl RunReport {
    pub fn final_objective(&self) -> f64 {
        self.final_f + self.final_g
    }

    /// Mean of `||v_t||^2` over the last `k` records (all records when
    /// fewer exist). Used for the stochastic stationarity diagnostics.
    pub fn mean_squared_direction_tail(&self, k: usize) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let tail = &self.records[self.records.len().saturating_sub(k)..];
        Some(
            tail.iter()
                .map(|r| r.direction_norm * r.direction_norm)
                .sum::<f64>()
                / tail.len() as f64,
        )
    }
}

fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn point_digest(x: &ManifoldPoint) -> PointDigest {
    let t = x.ambient();
    let bytes = (t.rows() as u64)
        .to_le_bytes()
        .into_iter()
        .chain((t.cols() as u64).to_le_bytes())
        .chain(
            t.data_row_major()
                .into_iter()
                .flat_map(|v| v.to_bits().to_le_bytes()),
        )
        .collect::<Vec<u8>>();
    PointDigest {
        feasibility_residual: x.manifold().feasibility_residual(t),
        checksum: fnv1a64(bytes),
    }
}

/// Retraction-based Bregman descent (composite objectives allowed).
pub fn run_r_rbgd(
    problem: &dyn ProblemOracle,
    h: &ReferenceFunction,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    expect_method(config, &[Method::RRbgd])?;
    run_deterministic(problem, Some(h), config, x0)
}

/// Projection-based Bregman descent, with the `-v^N` normal correction
/// when the method is `PRbgdC`. Smooth objectives only.
pub fn run_p_rbgd(
    problem: &dyn ProblemOracle,
    h: &ReferenceFunction,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    expect_method(config, &[Method::PRbgd, Method::PRbgdC])?;
    run_deterministic(problem, Some(h), config, x0)
}

/// Riemannian steepest descent with Armijo backtracking (`Rsd`) or with
/// additional forward tracking of the initial trial (`RsdAda`).
pub fn run_rsd(
    problem: &dyn ProblemOracle,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    expect_method(config, &[Method::Rsd, Method::RsdAda])?;
    run_deterministic(problem, None, config, x0)
}

/// Dispatch over the deterministic methods.
pub fn run(
    problem: &dyn ProblemOracle,
    h: Option<&ReferenceFunction>,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    match config.method {
        Method::RRbgd | Method::PRbgd | Method::PRbgdC => {
            let h = h.ok_or_else(|| {
                Error::InvalidConfig("Bregman methods need a reference function".into())
            })?;
            if config.method == Method::RRbgd {
                run_r_rbgd(problem, h, config, x0)
            } else {
                run_p_rbgd(problem, h, config, x0)
            }
        }
        Method::Rsd | Method::RsdAda => run_rsd(problem, config, x0),
        Method::SRRbgd | Method::SPRbgd => Err(Error::InvalidConfig(
            "stochastic methods run through run_stochastic".into(),
        )),
    }
}

fn expect_method(config: &SolverConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&config.method) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "method {} not valid for this entry point",
            config.method.name()
        )))
    }
}

struct Evaluated {
    f: f64,
    g: f64,
}

/// `<grad f(z), displacement(z)>`: first-order objective offset between a
/// near-feasible point and its exactly feasible shadow on the manifold.
/// Zero when the manifold reports no displacement.
fn feasibility_compensation(
    manifold: &Manifold,
    z: &crate::numerics::AmbientTensor,
    grad_z: &crate::numerics::AmbientTensor,
) -> f64 {
    manifold
        .feasibility_displacement(z)
        .map(|n| grad_z.dot(&n))
        .unwrap_or(0.0)
}

/// Objective change with both endpoints referred to their manifold shadows:
/// `F(next^) - F(cur^) = raw_delta - comp(next) + comp(cur)`.
fn compensated_decrease(
    problem: &dyn ProblemOracle,
    manifold: &Manifold,
    next: &ManifoldPoint,
    raw_delta: f64,
    comp_x: f64,
) -> Result<f64> {
    let grad_y = problem.euclid_grad(next.ambient())?;
    let comp_y = feasibility_compensation(manifold, next.ambient(), &grad_y);
    Ok(raw_delta - comp_y + comp_x)
}

fn evaluate(problem: &dyn ProblemOracle, x: &ManifoldPoint) -> Result<Evaluated> {
    let f = problem.value(x.ambient())?;
    let g = problem
        .nonsmooth()
        .map(|g| g.value(x.ambient()))
        .unwrap_or(0.0);
    if !f.is_finite() || !g.is_finite() {
        return Err(Error::Numerical(format!("non-finite objective {f} + {g}")));
    }
    Ok(Evaluated { f, g })
}

fn run_deterministic(
    problem: &dyn ProblemOracle,
    h: Option<&ReferenceFunction>,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    config.validate()?;
    let method = config.method;
    let manifold = x0.manifold();
    let g_term = problem.nonsmooth();
    let smooth = g_term.is_none();
    if !smooth && method != Method::RRbgd {
        return Err(Error::InvalidConfig(format!(
            "{} handles smooth objectives only",
            method.name()
        )));
    }
    let lambda = h.map(|h| h.lambda()).unwrap_or(1.0);

    let start = Instant::now();
    let mut x = x0.clone();
    let mut cur = evaluate(problem, &x)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut max_feas = manifold.feasibility_residual(x.ambient());
    let mut status = RunStatus::MaxIters;
    let mut last_grad_norm = None;
    let mut last_dir_norm = None;
    // Steepest-descent warm start: next initial trial is twice the last
    // accepted stepsize.
    let mut warm_alpha = config.alpha0;

    for t in 0..config.max_iters {
        let iter_start = Instant::now();
        let grad = match problem.euclid_grad(x.ambient()) {
            Ok(g) if g.is_finite_all() => g,
            _ if t == 0 => {
                problem.euclid_grad(x.ambient())?;
                unreachable!()
            }
            _ => {
                status = RunStatus::NumericalError;
                break;
            }
        };
        let grad_norm = if smooth {
            let n = manifold.project_tangent(&x, &grad)?.norm();
            last_grad_norm = Some(n);
            if n <= config.grad_tol {
                status = RunStatus::Converged;
                break;
            }
            Some(n)
        } else {
            None
        };

        // Direction.
        let (step_v, dir_norm, kappa) = match method {
            Method::RRbgd => {
                let spec = SubproblemSpec {
                    base: &x,
                    euclid_grad: &grad,
                    gamma: config.gamma,
                    h: h.expect("validated"),
                    g: g_term,
                };
                let sol = subproblem::solve_tangent(&spec)?;
                let n = sol.direction.norm();
                (sol.direction, n, 0.25 * config.gamma * lambda * n * n)
            }
            Method::PRbgd | Method::PRbgdC => {
                let spec = SubproblemSpec {
                    base: &x,
                    euclid_grad: &grad,
                    gamma: config.gamma,
                    h: h.expect("validated"),
                    g: None,
                };
                let sol = subproblem::solve_unconstrained(&spec)?;
                let n = sol.direction.norm();
                let combined = if method == Method::PRbgdC {
                    // u = -v^N; with tau >= 1 the bound ||u|| <= tau ||v||
                    // holds automatically.
                    let vn = manifold.project_normal(&x, &sol.direction)?;
                    debug_assert!(vn.norm() <= config.tau * n * (1.0 + 1e-12) + 1e-300);
                    sol.direction.sub(vn.ambient())
                } else {
                    sol.direction
                };
                (combined, n, 0.25 * config.gamma * lambda * n * n)
            }
            Method::Rsd | Method::RsdAda => {
                let rg = manifold.project_tangent(&x, &grad)?.into_ambient();
                let n = rg.norm();
                (rg.neg(), n, RSD_ARMIJO_C * n * n)
            }
            Method::SRRbgd | Method::SPRbgd => unreachable!("rejected by validate"),
        };

        if !smooth && dir_norm <= config.grad_tol {
            last_dir_norm = Some(dir_norm);
            status = RunStatus::Converged;
            break;
        }
        last_dir_norm = Some(dir_norm);

        // Candidate map at a trial stepsize.
        let retraction_based = matches!(method, Method::RRbgd | Method::Rsd | Method::RsdAda);
        let tangent = if retraction_based {
            Some(manifold.project_tangent(&x, &step_v)?)
        } else {
            None
        };
        let candidate = |alpha: f64| -> Result<ManifoldPoint> {
            if let Some(tv) = &tangent {
                manifold.retract(&x, &tv.scale(alpha))
            } else {
                manifold.project_manifold(&x.ambient().add_scaled(alpha, &step_v))
            }
        };
        // F(next) - F(cur) for the acceptance test, measured through the
        // oracle's difference path so its rounding error scales with the
        // step rather than with |F|.
        let decrease = |next: &ManifoldPoint| -> Result<f64> {
            let df = problem.value_difference(x.ambient(), next.ambient())?;
            let dg = g_term.map(|g| g.value(next.ambient())).unwrap_or(0.0) - cur.g;
            let delta = df + dg;
            if !delta.is_finite() {
                return Err(Error::Numerical(format!("non-finite objective change {delta}")));
            }
            Ok(delta)
        };
        // Every candidate sits within a few ulps of the manifold but not on
        // it, and that normal offset moves the objective by up to
        // ~eps * ||ambient grad|| * ||x||. Raw deltas within this band of
        // the acceptance threshold are decided by the feasibility-
        // compensated measurement instead (see `compensated_decrease`).
        let jitter_band = 16.0 * f64::EPSILON * grad.norm() * x.ambient().norm().max(1.0);
        let mut comp_x: Option<f64> = None;
        let mut passes = |next: &ManifoldPoint, delta: f64, bound: f64| -> bool {
            if delta <= bound - jitter_band {
                return true;
            }
            if delta > bound + jitter_band {
                return false;
            }
            let cx = *comp_x.get_or_insert_with(|| {
                feasibility_compensation(&manifold, x.ambient(), &grad)
            });
            match compensated_decrease(problem, &manifold, next, delta, cx) {
                Ok(corrected) => corrected <= bound,
                Err(_) => false,
            }
        };

        // Stepsize selection.
        let selected = if let Some(fa) = config.fixed_alpha {
            match candidate(fa) {
                Ok(next) => Some((fa, next, 1usize)),
                Err(_) => {
                    status = RunStatus::NumericalError;
                    break;
                }
            }
        } else {
            let rsd_family = matches!(method, Method::Rsd | Method::RsdAda);
            let mut alpha = if rsd_family {
                if t == 0 {
                    config.alpha0
                } else {
                    2.0 * warm_alpha
                }
            } else {
                config.alpha0
            };
            let mut trials = 0usize;
            let mut found = None;
            for k in 0..=MAX_LINESEARCH_SHRINKS {
                trials += 1;
                match candidate(alpha).and_then(|n| decrease(&n).map(|d| (n, d))) {
                    // Sufficient decrease: F(next) - F(cur) <= -kappa * alpha.
                    Ok((next, delta)) if passes(&next, delta, -kappa * alpha) => {
                        found = Some((alpha, next, trials, k == 0));
                        break;
                    }
                    // Domain violations and failed tests both shrink.
                    _ => alpha *= config.rho,
                }
            }
            match found {
                None => {
                    status = RunStatus::LinesearchFailure;
                    break;
                }
                Some((mut alpha, mut accepted, mut trials, first_trial)) => {
                    if method == Method::RsdAda && first_trial {
                        // Forward tracking: grow while the test keeps passing.
                        for _ in 0..RSD_MAX_GROWTHS {
                            let bigger = 2.0 * alpha;
                            trials += 1;
                            match candidate(bigger).and_then(|n| decrease(&n).map(|d| (n, d))) {
                                Ok((next, delta)) if passes(&next, delta, -kappa * bigger) => {
                                    alpha = bigger;
                                    accepted = next;
                                }
                                _ => break,
                            }
                        }
                    }
                    Some((alpha, accepted, trials))
                }
            }
        };

        let Some((alpha, next, trials)) = selected else {
            break;
        };
        let next_eval = match evaluate(problem, &next) {
            Ok(e) => e,
            Err(_) => {
                status = RunStatus::NumericalError;
                break;
            }
        };

        records.push(IterationRecord {
            t,
            f_value: cur.f,
            g_value: cur.g,
            grad_norm,
            direction_norm: dir_norm,
            alpha,
            linesearch_trials: trials,
            wall_ns: iter_start.elapsed().as_nanos() as u64,
        });
        warm_alpha = alpha;
        max_feas = max_feas.max(manifold.feasibility_residual(next.ambient()));
        x = next;
        cur = next_eval;
    }

    // Refresh the stationarity measure at the final iterate.
    if smooth {
        if let Ok(grad) = problem.euclid_grad(x.ambient()) {
            if let Ok(p) = manifold.project_tangent(&x, &grad) {
                last_grad_norm = Some(p.norm());
            }
        }
    }

    Ok(RunReport {
        config: config.clone(),
        iterations: records.len(),
        records,
        status,
        final_f: cur.f,
        final_g: cur.g,
        final_grad_norm: if smooth { last_grad_norm } else { None },
        final_direction_norm: last_dir_norm,
        digest: point_digest(&x),
        max_feasibility_residual: max_feas,
        wall_ns_total: start.elapsed().as_nanos() as u64,
        final_point: x,
    })
}

/// Stochastic Bregman descent at a fixed stepsize on a compact manifold.
///
/// Per iteration: draw a minibatch gradient, solve the same subproblem as
/// the deterministic counterpart with the estimate in place of the
/// gradient, and step without a linesearch (`u = 0` in the projection
/// variant). Record fields are computed from the full oracle so runs are
/// comparable with deterministic trajectories.
pub fn run_stochastic(
    oracle: &mut dyn StochasticOracle,
    h: &ReferenceFunction,
    config: &SolverConfig,
    x0: &ManifoldPoint,
) -> Result<RunReport> {
    config.validate()?;
    expect_method(config, &[Method::SRRbgd, Method::SPRbgd])?;
    let manifold = x0.manifold();
    if !manifold.is_compact() {
        return Err(Error::InvalidConfig(format!(
            "stochastic methods require a compact manifold, got {}",
            manifold.name()
        )));
    }
    if oracle.nonsmooth().is_some() {
        return Err(Error::InvalidConfig(
            "stochastic methods handle smooth objectives only".into(),
        ));
    }
    let alpha = config.fixed_alpha.expect("validated");
    let retraction_based = config.method == Method::SRRbgd;

    let start = Instant::now();
    let mut x = x0.clone();
    let mut cur = evaluate(oracle, &x)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut max_feas = manifold.feasibility_residual(x.ambient());
    let mut status = RunStatus::MaxIters;
    let mut last_grad_norm = None;
    let mut last_dir_norm = None;

    for t in 0..config.max_iters {
        let iter_start = Instant::now();
        let full_grad = match oracle.euclid_grad(x.ambient()) {
            Ok(g) if g.is_finite_all() => g,
            _ if t == 0 => {
                oracle.euclid_grad(x.ambient())?;
                unreachable!()
            }
            _ => {
                status = RunStatus::NumericalError;
                break;
            }
        };
        let grad_norm = manifold.project_tangent(&x, &full_grad)?.norm();
        last_grad_norm = Some(grad_norm);
        if grad_norm <= config.grad_tol {
            status = RunStatus::Converged;
            break;
        }

        let est = oracle.minibatch_grad(x.ambient(), config.batch_size)?;
        let spec = SubproblemSpec {
            base: &x,
            euclid_grad: &est,
            gamma: config.gamma,
            h,
            g: None,
        };
        let sol = if retraction_based {
            subproblem::solve_tangent(&spec)?
        } else {
            subproblem::solve_unconstrained(&spec)?
        };
        let dir_norm = sol.direction.norm();
        last_dir_norm = Some(dir_norm);

        let stepped = if retraction_based {
            manifold
                .project_tangent(&x, &sol.direction)
                .and_then(|tv| manifold.retract(&x, &tv.scale(alpha)))
        } else {
            manifold.project_manifold(&x.ambient().add_scaled(alpha, &sol.direction))
        };
        let next = match stepped.and_then(|n| evaluate(oracle, &n).map(|e| (n, e))) {
            Ok(v) => v,
            Err(_) => {
                status = RunStatus::NumericalError;
                break;
            }
        };

        records.push(IterationRecord {
            t,
            f_value: cur.f,
            g_value: cur.g,
            grad_norm: Some(grad_norm),
            direction_norm: dir_norm,
            alpha,
            linesearch_trials: 1,
            wall_ns: iter_start.elapsed().as_nanos() as u64,
        });
        max_feas = max_feas.max(manifold.feasibility_residual(next.0.ambient()));
        x = next.0;
        cur = next.1;
    }

    if let Ok(grad) = oracle.euclid_grad(x.ambient()) {
        if let Ok(p) = manifold.project_tangent(&x, &grad) {
            last_grad_norm = Some(p.norm());
        }
    }

    Ok(RunReport {
        config: config.clone(),
        iterations: records.len(),
        records,
        status,
        final_f: cur.f,
        final_g: cur.g,
        final_grad_norm: last_grad_norm,
        final_direction_norm: last_dir_norm,
        digest: point_digest(&x),
        max_feasibility_residual: max_feas,
        wall_ns_total: start.elapsed().as_nanos() as u64,
        final_point: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Manifold;
    use crate::numerics::{AmbientTensor, Rng};
    use crate::problems::{CompositeProblem, MinibatchOracle, SensingProblem};
    use crate::subproblem::NonsmoothTerm;

    /// `f(x) = 1/2 sum_i d_i x_i^2` on the sphere; minimizers are the
    /// +-axes of the smallest coefficient.
    struct DiagQuadratic {
        d: Vec<f64>,
    }

    impl ProblemOracle for DiagQuadratic {
        fn value(&self, x: &AmbientTensor) -> Result<f64> {
            Ok(0.5
                * x.iter()
                    .zip(&self.d)
                    .map(|(v, d)| d * v * v)
                    .sum::<f64>())
        }
        fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
            let d = self.d.clone();
            Ok(AmbientTensor::from_fn(x.rows(), 1, |i, _| d[i] * x.get(i, 0)))
        }
    }

    fn toy() -> (DiagQuadratic, Manifold) {
        (
            DiagQuadratic {
                d: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            },
            Manifold::Sphere { dim: 5 },
        )
    }

    fn verify_descent(report: &RunReport, kappa_per_alpha: impl Fn(&IterationRecord) -> f64) {
        for (i, rec) in report.records.iter().enumerate() {
            let next_f = report
                .records
                .get(i + 1)
                .map(|r| r.objective())
                .unwrap_or_else(|| report.final_objective());
            let decrease = next_f - rec.objective();
            let bound = -kappa_per_alpha(rec) * rec.alpha;
            assert!(
                decrease <= bound + 1e-9 * rec.objective().abs().max(1.0),
                "iteration {}: decrease {decrease:.3e} vs bound {bound:.3e}",
                rec.t
            );
        }
    }

    #[test]
    fn stationary_start_converges_in_zero_iterations() {
        let (p, m) = toy();
        let x0 = m
            .check_point(AmbientTensor::from_vec(vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let h = ReferenceFunction::quartic();
        let config = SolverConfig::new(Method::RRbgd, 4.0);
        let report = run_r_rbgd(&p, &h, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::Converged);
        assert_eq!(report.iterations, 0);
        assert!((report.final_f - 1.5).abs() <= 1e-12);
        assert!(report.final_grad_norm.unwrap() <= config.grad_tol);
    }

    #[test]
    fn r_rbgd_converges_to_the_smallest_axis_with_monotone_objective() {
        let (p, m) = toy();
        let mut rng = Rng::new(81);
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let mut config = SolverConfig::new(Method::RRbgd, 3.0);
        config.grad_tol = 1e-6;
        let report = run_r_rbgd(&p, &h, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::Converged);
        let lambda = h.lambda();
        verify_descent(&report, |r| {
            0.25 * config.gamma * lambda * r.direction_norm * r.direction_norm
        });
        let axis = report.final_point.ambient().get(0, 0).abs();
        assert!(axis >= 1.0 - 1e-6, "|x_1| = {axis}");
        assert!(report.max_feasibility_residual <= 1e-8);
    }

    #[test]
    fn p_rbgd_with_quadratic_reference_is_projected_gradient_descent() {
        let (p, m) = toy();
        let mut rng = Rng::new(82);
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quadratic();
        let mut config = SolverConfig::new(Method::PRbgd, 6.0);
        config.max_iters = 1;
        config.alpha0 = 1.0;
        let report = run_p_rbgd(&p, &h, &config, &x0).unwrap();
        assert_eq!(report.iterations, 1);
        // Reproduce the step by hand: v = -grad_R/gamma, then normalize.
        let grad = p.euclid_grad(x0.ambient()).unwrap();
        let rg = m.project_tangent(&x0, &grad).unwrap().into_ambient();
        let alpha = report.records[0].alpha;
        let manual = m
            .project_manifold(&x0.ambient().add_scaled(-alpha / config.gamma, &rg))
            .unwrap();
        let diff = report.final_point.ambient().sub(manual.ambient()).norm();
        assert!(diff <= 1e-12, "diff {diff:.3e}");
    }

    #[test]
    fn all_deterministic_methods_converge_on_the_toy_problem() {
        let (p, m) = toy();
        let mut rng = Rng::new(83);
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        for method in [
            Method::RRbgd,
            Method::PRbgd,
            Method::PRbgdC,
            Method::Rsd,
            Method::RsdAda,
        ] {
            let mut config = SolverConfig::new(method, 3.0);
            config.grad_tol = 1e-6;
            let report = run(&p, Some(&h), &config, &x0).unwrap();
            assert_eq!(report.status, RunStatus::Converged, "{}", method.name());
            assert!(
                report.final_grad_norm.unwrap() <= 1e-6,
                "{} grad {:?}",
                method.name(),
                report.final_grad_norm
            );
            assert!(report.max_feasibility_residual <= 1e-8);
            // No iteration should exhaust the shrink budget.
            assert!(report
                .records
                .iter()
                .all(|r| r.linesearch_trials <= MAX_LINESEARCH_SHRINKS));
        }
    }

    #[test]
    fn rsd_objective_is_monotone_with_armijo_decrease() {
        let (p, m) = toy();
        let mut rng = Rng::new(84);
        let x0 = m.random_point(&mut rng).unwrap();
        let mut config = SolverConfig::new(Method::Rsd, 0.0);
        config.grad_tol = 1e-8;
        let report = run_rsd(&p, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::Converged);
        verify_descent(&report, |r| {
            RSD_ARMIJO_C * r.direction_norm * r.direction_norm
        });
    }

    #[test]
    fn fixed_rank_projection_and_retraction_trajectories_agree() {
        // On the full-column-rank manifold the tangent space is the whole
        // ambient space, so both methods compute the same direction and the
        // two step maps coincide up to SVD roundoff.
        let mut rng = Rng::new(85);
        let problem = SensingProblem::generate(10, 2, 12, &mut rng).unwrap();
        let m = problem.manifold();
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let gamma = problem.smoothness_bound();
        let mut config = SolverConfig::new(Method::RRbgd, gamma);
        config.alpha0 = 1.0;
        config.grad_tol = 1e-12;
        config.max_iters = 100;
        let r_report = run_r_rbgd(&problem, &h, &config, &x0).unwrap();
        let mut p_config = config.clone();
        p_config.method = Method::PRbgd;
        let p_report = run_p_rbgd(&problem, &h, &p_config, &x0).unwrap();
        assert_eq!(r_report.status, p_report.status);
        assert_eq!(r_report.records.len(), p_report.records.len());
        for (a, b) in r_report.records.iter().zip(&p_report.records) {
            assert!(
                (a.f_value - b.f_value).abs() <= 1e-8 * a.f_value.abs().max(1.0),
                "record {}: {} vs {}",
                a.t,
                a.f_value,
                b.f_value
            );
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
        }
        // Both strictly decrease the objective.
        for w in r_report.records.windows(2) {
            assert!(w[1].f_value < w[0].f_value);
        }
    }

    #[test]
    fn composite_run_terminates_on_direction_norm_without_grad_records() {
        let (p, m) = toy();
        let composite = CompositeProblem::new(p, NonsmoothTerm::L1 { mu: 0.05 }).unwrap();
        let mut rng = Rng::new(86);
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quadratic();
        let mut config = SolverConfig::new(Method::RRbgd, 6.0);
        config.grad_tol = 1e-6;
        config.max_iters = 5000;
        let report = run_r_rbgd(&composite, &h, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::Converged);
        assert!(report.final_direction_norm.unwrap() <= 1e-6);
        assert!(report.final_grad_norm.is_none());
        assert!(report.records.iter().all(|r| r.grad_norm.is_none()));
        assert!(report.records.iter().all(|r| r.g_value >= 0.0));
    }

    #[test]
    fn composite_runs_are_rejected_for_projection_methods() {
        let (p, m) = toy();
        let composite = CompositeProblem::new(p, NonsmoothTerm::L1 { mu: 0.05 }).unwrap();
        let mut rng = Rng::new(87);
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let config = SolverConfig::new(Method::PRbgd, 3.0);
        assert!(matches!(
            run_p_rbgd(&composite, &h, &config, &x0),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// Problem whose objective can only be evaluated at one point; every
    /// linesearch candidate fails, exhausting the shrink budget.
    struct TrapProblem {
        home: Vec<f64>,
    }

    impl ProblemOracle for TrapProblem {
        fn value(&self, x: &AmbientTensor) -> Result<f64> {
            if x.data_row_major() == self.home {
                Ok(1.0)
            } else {
                Err(Error::DomainViolation { index: 0 })
            }
        }
        fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
            Ok(AmbientTensor::from_fn(x.rows(), x.cols(), |i, j| {
                if (i, j) == (0, 0) {
                    1.0
                } else {
                    0.5
                }
            }))
        }
    }

    #[test]
    fn exhausted_linesearch_reports_failure_status() {
        let m = Manifold::Sphere { dim: 3 };
        let x0 = m
            .check_point(AmbientTensor::from_vec(vec![0.0, 1.0, 0.0]).unwrap())
            .unwrap();
        let p = TrapProblem {
            home: x0.ambient().data_row_major(),
        };
        let h = ReferenceFunction::quartic();
        let config = SolverConfig::new(Method::RRbgd, 1.0);
        let report = run_r_rbgd(&p, &h, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::LinesearchFailure);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.final_f, 1.0);
    }

    #[test]
    fn fixed_step_domain_error_reports_numerical_status() {
        let m = Manifold::Sphere { dim: 3 };
        let x0 = m
            .check_point(AmbientTensor::from_vec(vec![0.0, 1.0, 0.0]).unwrap())
            .unwrap();
        let p = TrapProblem {
            home: x0.ambient().data_row_major(),
        };
        let h = ReferenceFunction::quartic();
        let mut config = SolverConfig::new(Method::RRbgd, 1.0);
        config.fixed_alpha = Some(0.5);
        let report = run_r_rbgd(&p, &h, &config, &x0).unwrap();
        assert_eq!(report.status, RunStatus::NumericalError);
    }

    #[test]
    fn stochastic_runs_are_seed_deterministic() {
        let mut rng = Rng::new(88);
        let problem = SensingProblem::generate_orthonormal(15, 2, 20, &mut rng).unwrap();
        let m = problem.manifold();
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let mut config = SolverConfig::new(Method::SRRbgd, 100.0);
        config.fixed_alpha = Some(0.5);
        config.batch_size = 5;
        config.max_iters = 40;
        config.seed = 11;
        let run_once = || {
            let oracle_rng = Rng::new(config.seed);
            let mut oracle = MinibatchOracle::sampled(problem.clone(), oracle_rng);
            run_stochastic(&mut oracle, &h, &config, &x0).unwrap()
        };
        let a = run_once();
        let b = run_once();
        assert_eq!(a.digest.checksum, b.digest.checksum);
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.f_value.to_bits(), rb.f_value.to_bits());
            assert_eq!(ra.direction_norm.to_bits(), rb.direction_norm.to_bits());
        }
    }

    #[test]
    fn full_batch_stochastic_matches_the_deterministic_fixed_step_run() {
        let mut rng = Rng::new(89);
        let problem = SensingProblem::generate_orthonormal(12, 2, 15, &mut rng).unwrap();
        let m = problem.manifold();
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let mut config = SolverConfig::new(Method::SRRbgd, 200.0);
        config.fixed_alpha = Some(1.0);
        config.batch_size = 15;
        config.max_iters = 60;
        let mut oracle = MinibatchOracle::full_enumeration(problem.clone(), Rng::new(0));
        let stochastic = run_stochastic(&mut oracle, &h, &config, &x0).unwrap();
        let mut det_config = config.clone();
        det_config.method = Method::RRbgd;
        let deterministic = run_r_rbgd(&problem, &h, &det_config, &x0).unwrap();
        assert_eq!(stochastic.digest.checksum, deterministic.digest.checksum);
        assert_eq!(stochastic.records.len(), deterministic.records.len());
        for (s, d) in stochastic.records.iter().zip(&deterministic.records) {
            assert_eq!(s.f_value.to_bits(), d.f_value.to_bits());
            assert_eq!(s.direction_norm.to_bits(), d.direction_norm.to_bits());
            assert_eq!(s.alpha.to_bits(), d.alpha.to_bits());
        }
    }

    #[test]
    fn stochastic_methods_reject_noncompact_manifolds() {
        let mut rng = Rng::new(90);
        let problem = SensingProblem::generate(10, 2, 8, &mut rng).unwrap();
        let m = problem.manifold();
        assert!(!m.is_compact());
        let x0 = m.random_point(&mut rng).unwrap();
        let h = ReferenceFunction::quartic();
        let mut config = SolverConfig::new(Method::SPRbgd, 10.0);
        config.fixed_alpha = Some(0.1);
        let mut oracle = MinibatchOracle::sampled(problem, Rng::new(0));
        assert!(matches!(
            run_stochastic(&mut oracle, &h, &config, &x0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn config_validation_catches_bad_parameters() {
        let mut c = SolverConfig::new(Method::RRbgd, 1.0);
        c.rho = 1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(Method::PRbgdC, 1.0);
        c.tau = 0.5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(Method::SRRbgd, 1.0);
        c.fixed_alpha = None;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(Method::RRbgd, 0.0);
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::new(Method::Rsd, 0.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn method_names_serialize_in_kebab_case() {
        assert_eq!(serde_json::to_string(&Method::RRbgd).unwrap(), "\"r-rbgd\"");
        assert_eq!(
            serde_json::to_string(&Method::PRbgdC).unwrap(),
            "\"p-rbgd-c\""
        );
        assert_eq!(
            serde_json::to_string(&Method::RsdAda).unwrap(),
            "\"rsd-ada\""
        );
        assert_eq!(
            serde_json::to_string(&Method::SRRbgd).unwrap(),
            "\"s-r-rbgd\""
        );
        let back: Method = serde_json::from_str("\"p-rbgd\"").unwrap();
        assert_eq!(back, Method::PRbgd);
    }

    #[test]
    fn checksum_is_stable_and_shape_sensitive() {
        let m = Manifold::Sphere { dim: 3 };
        let x = m
            .check_point(AmbientTensor::from_vec(vec![1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let d1 = point_digest(&x);
        let d2 = point_digest(&x);
        assert_eq!(d1.checksum, d2.checksum);
        let y = m
            .check_point(AmbientTensor::from_vec(vec![0.0, 1.0, 0.0]).unwrap())
            .unwrap();
        assert_ne!(point_digest(&y).checksum, d1.checksum);
    }
}
