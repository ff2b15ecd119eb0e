
use super::tensor::AmbientTensor;
use crate::error::{Error, Result};

/// Singular value ratio below which a matrix is treated as rank deficient.
pub const RANK_RATIO_TOL: f64 = 1e-12;

/// Reconstruction residual (relative to `||a||`) above which a thin SVD is
/// rejected and recomputed robustly.
pub const SVD_RESIDUAL_REL: f64 = 1e-10;

/// Thin SVD `a = u * diag(s) * v^T` with `s` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: AmbientTensor,
    pub s: Vec<f64>,
    pub v: AmbientTensor,
}

impl Svd {
    /// `|| u diag(s) v^T - a ||`, used by the contract tests.
    pub fn reconstruction_residual(&self, a: &AmbientTensor) -> f64 {
        self.reconstruct().sub(a).norm()
    }

    pub fn reconstruct(&self) -> AmbientTensor {
        let k = self.s.len();
        let us = AmbientTensor::from_fn(self.u.rows(), k, |i, j| self.u.get(i, j) * self.s[j]);
        us.matmul(&self.v.transpose())
    }

    /// Keep the leading `r` singular triplets.
    pub fn truncate(&self, r: usize) -> Svd {
        let r = r.min(self.s.len());
        Svd {
            u: AmbientTensor::from_fn(self.u.rows(), r, |i, j| self.u.get(i, j)),
            s: self.s[..r].to_vec(),
            v: AmbientTensor::from_fn(self.v.rows(), r, |i, j| self.v.get(i, j)),
        }
    }
}

/// Thin SVD with a certified result.
///
/// The fast path is nalgebra's Golub-Kahan implementation, but that routine
/// can silently return an invalid factorization when the input is exactly
/// rank deficient (trailing zero singular values): the singular values may
/// look fine while the singular subspaces are wrong by O(1e-2). Every fast
/// factorization is therefore checked against its reconstruction residual,
/// and suspect ones are recomputed with one-sided Jacobi, which handles
/// zero singular values exactly.
pub fn svd(a: &AmbientTensor) -> Result<Svd> {
    let floor = f64::MIN_POSITIVE;
    if let Ok(f) = golub_kahan_svd(a) {
        if f.reconstruction_residual(a) <= SVD_RESIDUAL_REL * a.norm().max(floor) {
            return Ok(f);
        }
    }
    let f = jacobi_svd(a)?;
    if f.reconstruction_residual(a) <= SVD_RESIDUAL_REL * a.norm().max(floor) {
        Ok(f)
    } else {
        Err(Error::SvdNonConvergence)
    }
}

fn golub_kahan_svd(a: &AmbientTensor) -> Result<Svd> {
    let mut f = nalgebra::linalg::SVD::try_new(a.na().clone(), true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdNonConvergence)?;
    f.sort_by_singular_values();
    let u = f.u.ok_or(Error::SvdNonConvergence)?;
    let v_t = f.v_t.ok_or(Error::SvdNonConvergence)?;
    let s: Vec<f64> = f.singular_values.iter().copied().collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdNonConvergence);
    }
    Ok(Svd {
        u: AmbientTensor::from_na(u),
        s,
        v: AmbientTensor::from_na(v_t.transpose()),
    })
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD: plane rotations orthogonalize column
/// pairs until all columns are mutually orthogonal; the column norms are
/// then the singular values. Much slower than Golub-Kahan but accurate for
/// rank-deficient inputs, so it only serves as the certification fallback.
fn jacobi_svd(a: &AmbientTensor) -> Result<Svd> {
    let (m, n) = a.shape();
    if m < n {
        let f = jacobi_svd(&a.transpose())?;
        return Ok(Svd {
            u: f.v,
            s: f.s,
            v: f.u,
        });
    }
    let mut w = a.clone();
    let mut v = AmbientTensor::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0_f64, 0.0_f64, 0.0_f64);
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNonConvergence);
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| {
            let mut sum = 0.0;
            for i in 0..m {
                sum += w.get(i, j) * w.get(i, j);
            }
            sum.sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = AmbientTensor::from_fn(n, n, |i, jj| v.get(i, order[jj]));
    let mut u = AmbientTensor::zeros(m, n);
    let mut zero_cols = Vec::new();
    for (jj, &j) in order.iter().enumerate() {
        // Singular values at or near underflow leave the left vector
        // undetermined; fill those columns with an orthonormal complement.
        if s[jj] > f64::MIN_POSITIVE / f64::EPSILON {
            for i in 0..m {
                u.set(i, jj, w.get(i, j) / s[jj]);
            }
        } else {
            zero_cols.push(jj);
        }
    }
    fill_orthonormal_columns(&mut u, &zero_cols)?;
    Ok(Svd {
        u,
        s,
        v: v_sorted,
    })
}

/// Completes the listed (currently zero) columns of `u` so that all columns
/// are orthonormal, by Gram-Schmidt over canonical basis vectors.
fn fill_orthonormal_columns(u: &mut AmbientTensor, zero_cols: &[usize]) -> Result<()> {
    let (m, n) = u.shape();
    let mut candidate = 0usize;
    for &col in zero_cols {
        let mut placed = false;
        while candidate < m {
            let mut vec: Vec<f64> = (0..m)
                .map(|i| if i == candidate { 1.0 } else { 0.0 })
                .collect();
            for j in 0..n {
                if zero_cols.contains(&j) && j >= col {
                    continue; // not yet filled
                }
                let mut dot = 0.0;
                for (i, value) in vec.iter().enumerate() {
                    dot += value * u.get(i, j);
                }
                for (i, value) in vec.iter_mut().enumerate() {
                    *value -= dot * u.get(i, j);
                }
            }
            let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
            candidate += 1;
            if norm > 1e-3 {
                for (i, value) in vec.iter().enumerate() {
                    u.set(i, col, value / norm);
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Numerical(
                "could not complete an orthonormal basis for the SVD".into(),
            ));
        }
    }
    Ok(())
}

/// Orthonormal polar factor of a full-column-rank matrix: the `u v^T` of its
/// thin SVD, equivalently `argmin_Q ||Q - a||` over matrices with
/// orthonormal columns.
pub fn polar_factor(a: &AmbientTensor) -> Result<AmbientTensor> {
    let f = svd(a)?;
    let smax = f.s[0];
    let smin = *f.s.last().unwrap_or(&0.0);
    if !(smax > 0.0) || smin <= RANK_RATIO_TOL * smax {
        return Err(Error::RankDeficient {
            ratio: if smax > 0.0 { smin / smax } else { 0.0 },
        });
    }
    Ok(f.u.matmul(&f.v.transpose()))
}

/// Neumaier-compensated running sum.
///
/// Keeps the accumulated rounding error in a separate compensation term, so
/// the final sum is accurate to O(eps) relative to the exact result instead
/// of O(n*eps). Objective evaluations at benchmark sizes (tens of thousands
/// of summands at magnitude ~1e4) need this: the linesearch compares
/// objective differences near the last few ulps.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        self.compensation += if self.sum.abs() >= value.abs() {
            (self.sum - t) + value
        } else {
            (value - t) + self.sum
        };
        self.sum = t;
    }

    /// Adds a product together with its exact rounding error (via FMA), so
    /// dot products accumulate with full compensation (Ogita-Rump-Oishi
    /// "Dot2" scheme).
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let err = a.mul_add(b, -p);
        self.add(p);
        self.compensation += err;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated dot product of two equally long slices.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add_product(*x, *y);
    }
    acc.total()
}

/// Solve `T x = rhs` for symmetric positive definite tridiagonal `T` given
/// by its diagonal and (symmetric) off-diagonal, via the Thomas algorithm.
pub fn solve_spd_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n || rhs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "tridiagonal solve: diag {}, off {}, rhs {}",
            n,
            off.len(),
            rhs.len()
        )));
    }
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut c = vec![0.0; n.saturating_sub(1)];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= 1e-14 * scale {
        return Err(Error::SingularSystem { row: 0 });
    }
    if n > 1 {
        c[0] = off[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if pivot.abs() <= 1e-14 * scale {
            return Err(Error::SingularSystem { row: i });
        }
        if i < n - 1 {
            c[i] = off[i] / pivot;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
