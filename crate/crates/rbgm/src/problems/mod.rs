//! Benchmark problem oracles.
//!
//! Two objectives drive the benchmark suite: a discretized nonlinear
//! eigenvalue problem on the Stiefel manifold and low-rank quadratic
//! sensing on the fixed-rank manifold. Both expose plain value/gradient
//! oracles; the sensing problem additionally supports minibatch gradient
//! estimates for the stochastic solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::Manifold;
use crate::numerics::{solve_spd_tridiagonal, AmbientTensor, CompensatedSum, Rng};
use crate::subproblem::NonsmoothTerm;

/// Value/gradient oracle over the ambient space.
///
/// Oracles are pure given immutable problem data; feasibility of the query
/// point is the caller's responsibility.
pub trait ProblemOracle {
    fn value(&self, x: &AmbientTensor) -> Result<f64>;
    fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor>;
    /// Composite term, when the objective is `f + g`.
    fn nonsmooth(&self) -> Option<&NonsmoothTerm> {
        None
    }
    /// `f(y) - f(x)`, the quantity the linesearch acceptance test compares
    /// against the sufficient-decrease bound.
    ///
    /// The default subtracts two full evaluations, whose rounding error
    /// scales with `|f|`. Problems override this with an algebraic
    /// rearrangement whose error scales with `||y - x||` instead; near
    /// convergence the true per-step decrease can sit several orders of
    /// magnitude below one ulp of `f`, where the subtraction of full values
    /// is pure noise.
    fn value_difference(&self, x: &AmbientTensor, y: &AmbientTensor) -> Result<f64> {
        Ok(self.value(y)? - self.value(x)?)
    }
}

/// Oracle with an additional minibatch gradient estimator.
pub trait StochasticOracle: ProblemOracle {
    /// Unbiased estimate of the full gradient from `batch` i.i.d. draws.
    fn minibatch_grad(&mut self, x: &AmbientTensor, batch: usize) -> Result<AmbientTensor>;
    fn num_samples(&self) -> usize;
}

/// Smooth base objective plus an explicit nonsmooth term.
pub struct CompositeProblem<P: ProblemOracle> {
    base: P,
    g: NonsmoothTerm,
}

impl<P: ProblemOracle> CompositeProblem<P> {
    pub fn new(base: P, g: NonsmoothTerm) -> Result<Self> {
        g.validate()?;
        Ok(Self { base, g })
    }
}

impl<P: ProblemOracle> ProblemOracle for CompositeProblem<P> {
    fn value(&self, x: &AmbientTensor) -> Result<f64> {
        self.base.value(x)
    }
    fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
        self.base.euclid_grad(x)
    }
    fn nonsmooth(&self) -> Option<&NonsmoothTerm> {
        Some(&self.g)
    }
    fn value_difference(&self, x: &AmbientTensor, y: &AmbientTensor) -> Result<f64> {
        self.base.value_difference(x, y)
    }
}

/// Trace-minimization form of a discretized nonlinear eigenvalue problem:
///
/// ```text
/// f(X) = 1/2 tr(X^T L X) + (beta/4) rho^T L^{-1} rho,   rho = diag(X X^T)
/// ```
///
/// on the Stiefel manifold, with `L` the second-difference matrix
/// (2 on the diagonal, -1 off). `L` is kept implicit; `L^{-1} rho` is one
/// tridiagonal solve per evaluation.
#[derive(Clone, Debug)]
pub struct NepvProblem {
    m: usize,
    p: usize,
    beta: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl NepvProblem {
    pub fn new(m: usize, p: usize, beta: f64) -> Result<Self> {
        if m == 0 || p == 0 || m < p {
            return Err(Error::InvalidInput(format!(
                "need m >= p >= 1, got m={m}, p={p}"
            )));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidInput(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self {
            m,
            p,
            beta,
            diag: vec![2.0; m],
            off: vec![-1.0; m.saturating_sub(1)],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::Stiefel {
            rows: self.m,
            cols: self.p,
        }
    }

    /// Column-norm bound on the second-difference matrix.
    pub fn l_one_norm(&self) -> f64 {
        if self.m == 1 {
            2.0
        } else {
            4.0
        }
    }

    fn check_shape(&self, x: &AmbientTensor) -> Result<()> {
        if x.shape() != (self.m, self.p) {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{}, got {:?}",
                self.m,
                self.p,
                x.shape()
            )));
        }
        Ok(())
    }

    fn apply_l(&self, x: &AmbientTensor) -> AmbientTensor {
        let m = self.m;
        let xm = x.na();
        let mut out = AmbientTensor::zeros(m, self.p);
        {
            let om = out.na_mut();
            for j in 0..self.p {
                let col = xm.column(j);
                let mut oc = om.column_mut(j);
                for i in 0..m {
                    let mut v = 2.0 * col[i];
                    if i > 0 {
                        v -= col[i - 1];
                    }
                    if i + 1 < m {
                        v -= col[i + 1];
                    }
                    oc[i] = v;
                }
            }
        }
        out
    }

    /// `rho_i = ||row i of X||^2`, the diagonal of `X X^T`.
    fn density(&self, x: &AmbientTensor) -> Vec<f64> {
        let xm = x.na();
        let mut rho = vec![0.0; self.m];
        for j in 0..self.p {
            let col = xm.column(j);
            for i in 0..self.m {
                rho[i] += col[i] * col[i];
            }
        }
        rho
    }

    fn potential(&self, rho: &[f64]) -> Result<Vec<f64>> {
        solve_spd_tridiagonal(&self.diag, &self.off, rho)
    }
}

impl ProblemOracle for NepvProblem {
    fn value(&self, x: &AmbientTensor) -> Result<f64> {
        self.check_shape(x)?;
        let lx = self.apply_l(x);
        let mut acc = CompensatedSum::new();
        for (xi, li) in x.iter().zip(lx.iter()) {
            acc.add_product(0.5 * xi, *li);
        }
        if self.beta == 0.0 {
            return Ok(acc.total());
        }
        let rho = self.density(x);
        let w = self.potential(&rho)?;
        for (r, w) in rho.iter().zip(&w) {
            acc.add_product(0.25 * self.beta * r, *w);
        }
        Ok(acc.total())
    }

    fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
        self.check_shape(x)?;
        let mut grad = self.apply_l(x);
        if self.beta == 0.0 {
            return Ok(grad);
        }
        let rho = self.density(x);
        let w = self.potential(&rho)?;
        let xm = x.na();
        let gm = grad.na_mut();
        for j in 0..self.p {
            let col = xm.column(j);
            let mut gc = gm.column_mut(j);
            for i in 0..self.m {
                gc[i] += self.beta * w[i] * col[i];
            }
        }
        Ok(grad)
    }

    fn value_difference(&self, x: &AmbientTensor, y: &AmbientTensor) -> Result<f64> {
        self.check_shape(x)?;
        self.check_shape(y)?;
        // Every term below carries a factor of d = y - x, so the rounding
        // error of the result scales with ||d|| rather than with |f|.
        let d = y.sub(x);
        let s = y.add(x);
        // Kinetic part: <Y,LY> - <X,LX> = <Y-X, L(Y+X)> since L is symmetric.
        let ls = self.apply_l(&s);
        let mut acc = CompensatedSum::new();
        for (di, li) in d.iter().zip(ls.iter()) {
            acc.add_product(0.5 * di, *li);
        }
        if self.beta == 0.0 {
            return Ok(acc.total());
        }
        // Coulomb part: with Q(rho) = rho^T L^{-1} rho,
        // Q(rho_y) - Q(rho_x) = (rho_y - rho_x)^T L^{-1} (rho_y + rho_x),
        // and rho_y - rho_x factors pointwise through d: sum_j d_ij s_ij.
        let dm = d.na();
        let sm = s.na();
        let mut delta_rho = vec![0.0; self.m];
        for j in 0..self.p {
            let dc = dm.column(j);
            let sc = sm.column(j);
            for i in 0..self.m {
                delta_rho[i] += dc[i] * sc[i];
            }
        }
        let rho_x = self.density(x);
        let rho_y = self.density(y);
        let rho_sum: Vec<f64> = rho_x.iter().zip(&rho_y).map(|(a, b)| a + b).collect();
        let w_sum = self.potential(&rho_sum)?;
        for (dr, w) in delta_rho.iter().zip(&w_sum) {
            acc.add_product(0.25 * self.beta * dr, *w);
        }
        Ok(acc.total())
    }
}

/// Low-rank quadratic sensing:
///
/// ```text
/// f(X) = 1/2 sum_j (||X^T y_j||^2 - c_j)^2
/// ```
///
/// over m x r matrices of rank r, with targets generated from a planted
/// ground truth so the global minimum value is zero.
#[derive(Clone, Debug)]
pub struct SensingProblem {
    m: usize,
    r: usize,
    n: usize,
    /// Measurement vectors as columns, m x n.
    design: AmbientTensor,
    targets: Vec<f64>,
    ground_truth: AmbientTensor,
    orthonormal: bool,
}

impl SensingProblem {
    /// Draws the ground truth and the design from the standard normal
    /// distribution (ground truth first), then computes targets exactly.
    pub fn generate(m: usize, r: usize, n: usize, rng: &mut Rng) -> Result<Self> {
        Self::generate_inner(m, r, n, rng, false)
    }

    /// Same generation but with an orthonormalized ground truth, so the
    /// zero-residual minimizer lies on the Stiefel manifold. Used by the
    /// stochastic solvers, which require a compact manifold.
    pub fn generate_orthonormal(m: usize, r: usize, n: usize, rng: &mut Rng) -> Result<Self> {
        Self::generate_inner(m, r, n, rng, true)
    }

    fn generate_inner(
        m: usize,
        r: usize,
        n: usize,
        rng: &mut Rng,
        orthonormal: bool,
    ) -> Result<Self> {
        if m == 0 || r == 0 || m < r {
            return Err(Error::InvalidInput(format!(
                "need m >= r >= 1, got m={m}, r={r}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("need at least one measurement".into()));
        }
        let raw = rng.normal_matrix(m, r);
        let ground_truth = if orthonormal {
            crate::numerics::polar_factor(&raw)?
        } else {
            raw
        };
        let design = rng.normal_matrix(m, n);
        let mut problem = Self {
            m,
            r,
            n,
            design,
            targets: vec![0.0; n],
            ground_truth,
        orthonormal,
        };
        // Targets come from the same scoring code the oracle uses, so the
        // residuals at the ground truth are exactly zero.
        let gt = problem.ground_truth.clone();
        for j in 0..n {
            problem.targets[j] = problem.measure(&gt, j);
        }
        Ok(problem)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn ground_truth(&self) -> &AmbientTensor {
        &self.ground_truth
    }

    pub fn manifold(&self) -> Manifold {
        if self.orthonormal {
            Manifold::Stiefel {
                rows: self.m,
                cols: self.r,
            }
        } else {
            Manifold::FixedRank {
                rows: self.m,
                cols: self.r,
                rank: self.r,
            }
        }
    }

    /// Upper bound on the relative-smoothness constant of the objective
    /// with respect to the quartic reference:
    /// `L = max(6 sum_j ||y_j||^4, 2 sum_j c_j ||y_j||^2)`, from bounding
    /// the Hessian quadratic form by `L (||X||^2 + 1) ||W||^2`.
    pub fn smoothness_bound(&self) -> f64 {
        let mut s4 = 0.0;
        let mut s2 = 0.0;
        for j in 0..self.n {
            let ynorm2 = self.design.na().column(j).norm_squared();
            s4 += ynorm2 * ynorm2;
            s2 += self.targets[j] * ynorm2;
        }
        (6.0 * s4).max(2.0 * s2)
    }

    /// Relative distance between the outer products `X X^T` and the ground
    /// truth's; informational, reported alongside converged runs.
    pub fn recovery_error(&self, x: &AmbientTensor) -> f64 {
        let gx = x.matmul(&x.transpose());
        let gs = self.ground_truth.matmul(&self.ground_truth.transpose());
        gx.sub(&gs).norm() / gs.norm().max(f64::MIN_POSITIVE)
    }

    fn check_shape(&self, x: &AmbientTensor) -> Result<()> {
        if x.shape() != (self.m, self.r) {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{}, got {:?}",
                self.m,
                self.r,
                x.shape()
            )));
        }
        Ok(())
    }

    /// `||X^T y_j||^2`.
    fn measure(&self, x: &AmbientTensor, j: usize) -> f64 {
        let y = self.design.na().column(j);
        let xm = x.na();
        let mut s = 0.0;
        for c in 0..self.r {
            let z = xm.column(c).dot(&y);
            s += z * z;
        }
        s
    }

    fn residual(&self, x: &AmbientTensor, j: usize) -> f64 {
        self.measure(x, j) - self.targets[j]
    }

    /// Adds `k * grad of (1/2) residual_j^2 = k * 2 r_j y_j (y_j^T X)` into
    /// the accumulator. All gradient paths (full, per-sample, minibatch)
    /// funnel through this one routine so their arithmetic agrees bit for
    /// bit when the index sets agree.
    fn accumulate_term_grad(&self, x: &AmbientTensor, j: usize, k: f64, acc: &mut AmbientTensor) {
        let y = self.design.na().column(j);
        let xm = x.na();
        let rj = self.residual(x, j);
        let scale = 2.0 * k * rj;
        let am = acc.na_mut();
        for c in 0..self.r {
            let z = xm.column(c).dot(&y);
            am.column_mut(c).axpy(scale * z, &y, 1.0);
        }
    }

    /// Gradient of the per-sample function `f_j = N * (1/2) residual_j^2`,
    /// whose uniform expectation over `j` is the full objective.
    pub fn per_sample_grad(&self, x: &AmbientTensor, j: usize) -> Result<AmbientTensor> {
        self.check_shape(x)?;
        if j >= self.n {
            return Err(Error::InvalidInput(format!(
                "sample index {j} out of range (n={})",
                self.n
            )));
        }
        let mut acc = AmbientTensor::zeros(self.m, self.r);
        self.accumulate_term_grad(x, j, self.n as f64, &mut acc);
        Ok(acc)
    }
}

impl ProblemOracle for SensingProblem {
    fn value(&self, x: &AmbientTensor) -> Result<f64> {
        self.check_shape(x)?;
        let mut acc = CompensatedSum::new();
        for j in 0..self.n {
            let r = self.residual(x, j);
            acc.add_product(0.5 * r, r);
        }
        Ok(acc.total())
    }

    fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
        self.check_shape(x)?;
        let mut acc = AmbientTensor::zeros(self.m, self.r);
        for j in 0..self.n {
            self.accumulate_term_grad(x, j, 1.0, &mut acc);
        }
        Ok(acc)
    }

    fn value_difference(&self, x: &AmbientTensor, y: &AmbientTensor) -> Result<f64> {
        self.check_shape(x)?;
        self.check_shape(y)?;
        // Per sample, with u = X^T y_j, u' = Y^T y_j and du = (Y-X)^T y_j:
        //   residual'^2 - residual^2 = dm * (residual' + residual),
        //   dm = ||u'||^2 - ||u||^2 = sum_k du_k (u_k + u'_k),
        // so every term carries a factor of du and the rounding error of the
        // sum scales with ||Y - X||.
        let d = y.sub(x);
        let xm = x.na();
        let dm = d.na();
        let mut acc = CompensatedSum::new();
        for j in 0..self.n {
            let yj = self.design.na().column(j);
            let mut meas = 0.0;
            let mut meas_diff = 0.0;
            for c in 0..self.r {
                let u = xm.column(c).dot(&yj);
                let du = dm.column(c).dot(&yj);
                meas += u * u;
                meas_diff += du * (2.0 * u + du);
            }
            let res = meas - self.targets[j];
            // 1/2 (res'^2 - res^2) with res' = res + meas_diff.
            acc.add_product(0.5 * meas_diff, 2.0 * res + meas_diff);
        }
        Ok(acc.total())
    }
}

/// Minibatch gradient estimator over a sensing problem.
///
/// Indices are drawn i.i.d. uniform with replacement. The estimator sums
/// raw per-term gradients and applies the `N/|B|` scaling once at the end,
/// so a full-enumeration batch reproduces the deterministic gradient
/// exactly.
pub struct MinibatchOracle {
    base: SensingProblem,
    rng: Rng,
    enumerate_full: bool,
}

impl MinibatchOracle {
    pub fn sampled(base: SensingProblem, rng: Rng) -> Self {
        Self {
            base,
            rng,
            enumerate_full: false,
        }
    }

    /// Test hook: replaces sampling by deterministic enumeration `0..N`
    /// (batch size must then equal `N`).
    pub fn full_enumeration(base: SensingProblem, rng: Rng) -> Self {
        Self {
            base,
            rng,
            enumerate_full: true,
        }
    }

    pub fn base(&self) -> &SensingProblem {
        &self.base
    }
}

impl ProblemOracle for MinibatchOracle {
    fn value(&self, x: &AmbientTensor) -> Result<f64> {
        self.base.value(x)
    }
    fn euclid_grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
        self.base.euclid_grad(x)
    }
    fn value_difference(&self, x: &AmbientTensor, y: &AmbientTensor) -> Result<f64> {
        self.base.value_difference(x, y)
    }
}

impl StochasticOracle for MinibatchOracle {
    fn minibatch_grad(&mut self, x: &AmbientTensor, batch: usize) -> Result<AmbientTensor> {
        self.base.check_shape(x)?;
        if batch == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        let n = self.base.n;
        let mut acc = AmbientTensor::zeros(self.base.m, self.base.r);
        if self.enumerate_full {
            if batch != n {
                return Err(Error::InvalidInput(format!(
                    "full enumeration requires batch == N ({n}), got {batch}"
                )));
            }
            for j in 0..n {
                self.base.accumulate_term_grad(x, j, 1.0, &mut acc);
            }
        } else {
            for _ in 0..batch {
                let j = self.rng.index(n);
                self.base.accumulate_term_grad(x, j, 1.0, &mut acc);
            }
        }
        Ok(acc.scale(n as f64 / batch as f64))
    }

    fn num_samples(&self) -> usize {
        self.base.n
    }
}

/// Seed-only serializable description of a problem instance; generated
/// arrays are reproduced from the seed on build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemDescriptor {
    Nepv {
        m: usize,
        p: usize,
        beta: f64,
    },
    Sensing {
        m: usize,
        r: usize,
        n: usize,
        seed: u64,
        #[serde(default)]
        orthonormal: bool,
    },
}

pub enum BuiltProblem {
    Nepv(NepvProblem),
    Sensing(SensingProblem),
}

impl ProblemDescriptor {
    pub fn build(&self) -> Result<BuiltProblem> {
        match *self {
            ProblemDescriptor::Nepv { m, p, beta } => {
                Ok(BuiltProblem::Nepv(NepvProblem::new(m, p, beta)?))
            }
            ProblemDescriptor::Sensing {
                m,
                r,
                n,
                seed,
                orthonormal,
            } => {
                let mut rng = Rng::new(seed);
                let p = if orthonormal {
                    SensingProblem::generate_orthonormal(m, r, n, &mut rng)?
                } else {
                    SensingProblem::generate(m, r, n, &mut rng)?
                };
                Ok(BuiltProblem::Sensing(p))
            }
        }
    }
}

impl BuiltProblem {
    pub fn manifold(&self) -> Manifold {
        match self {
            BuiltProblem::Nepv(p) => p.manifold(),
            BuiltProblem::Sensing(p) => p.manifold(),
        }
    }

    pub fn oracle(&self) -> &dyn ProblemOracle {
        match self {
            BuiltProblem::Nepv(p) => p,
            BuiltProblem::Sensing(p) => p,
        }
    }
}
