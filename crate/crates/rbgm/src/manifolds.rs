//! Embedded submanifolds of a Euclidean matrix space: the unit sphere,
//! the Stiefel manifold of orthonormal frames, and fixed-rank matrices.
//!
//! Each manifold supplies the four geometric primitives the optimizers
//! need: orthogonal projection onto the tangent and normal spaces at a
//! point, a retraction pulling tangent steps back to the manifold, and
//! metric projection (closest point) from the ambient space. Points carry
//! their feasibility certificate; fixed-rank points additionally cache the
//! thin SVD factors that every tangent-space operation reuses.
//!
//! Conventions: sphere points are `n x 1` tensors with unit norm; Stiefel
//! points are `m x p` with orthonormal columns (`m >= p`); fixed-rank
//! points are `m x p` of exact rank `r`, detected through the singular
//! value ratio `s_r / s_1 > 1e-12`. The fixed-rank manifold with `p == r`
//! degenerates to the open set of full-column-rank matrices: the tangent
//! space is the whole ambient space and retraction reduces to addition.

use crate::error::{Error, Result};
use crate::numerics::{
    polar_factor, svd, AmbientTensor, CompensatedSum, Rng, Svd, RANK_RATIO_TOL,
};

/// Feasibility residual accepted for points on a manifold.
pub const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Manifold {
    /// Unit sphere in `R^dim`, points are `dim x 1`.
    Sphere { dim: usize },
    /// Matrices `rows x cols` with orthonormal columns.
    Stiefel { rows: usize, cols: usize },
    /// Matrices `rows x cols` of fixed rank `rank`.
    FixedRank { rows: usize, cols: usize, rank: usize },
}

/// A feasible point. Fixed-rank points cache thin SVD factors.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    manifold: Manifold,
    ambient: AmbientTensor,
    factors: Option<Svd>,
}

/// Tangent or normal vector at some base point, stored in ambient
/// coordinates. The flag records which subspace it was projected into.
#[derive(Clone, Debug)]
pub struct TangentVector {
    ambient: AmbientTensor,
    normal: bool,
}

impl TangentVector {
    pub fn ambient(&self) -> &AmbientTensor {
        &self.ambient
    }

    pub fn into_ambient(self) -> AmbientTensor {
        self.ambient
    }

    pub fn is_normal(&self) -> bool {
        self.normal
    }

    pub fn norm(&self) -> f64 {
        self.ambient.norm()
    }

    pub fn scale(&self, k: f64) -> TangentVector {
        TangentVector {
            ambient: self.ambient.scale(k),
            normal: self.normal,
        }
    }
}

impl ManifoldPoint {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn ambient(&self) -> &AmbientTensor {
        &self.ambient
    }

    pub fn into_ambient(self) -> AmbientTensor {
        self.ambient
    }

    /// Thin SVD factors, present on fixed-rank points.
    pub fn factors(&self) -> Option<&Svd> {
        self.factors.as_ref()
    }
}

fn sym(a: &AmbientTensor) -> AmbientTensor {
    a.add(&a.transpose()).scale(0.5)
}

impl Manifold {
    pub fn name(&self) -> String {
        match self {
            Manifold::Sphere { dim } => format!("sphere({dim})"),
            Manifold::Stiefel { rows, cols } => format!("stiefel({rows},{cols})"),
            Manifold::FixedRank { rows, cols, rank } => {
                format!("fixed_rank({rows},{cols},{rank})")
            }
        }
    }

    /// Shape of the ambient tensors carrying points and directions.
    pub fn ambient_shape(&self) -> (usize, usize) {
        match *self {
            Manifold::Sphere { dim } => (dim, 1),
            Manifold::Stiefel { rows, cols } => (rows, cols),
            Manifold::FixedRank { rows, cols, .. } => (rows, cols),
        }
    }

    /// Whether the manifold is compact; the stochastic solvers require it.
    pub fn is_compact(&self) -> bool {
        !matches!(self, Manifold::FixedRank { .. })
    }

    /// Fixed-rank with `rank == min(rows, cols)` is the open set of
    /// full-rank matrices: the tangent space at every point is the whole
    /// ambient space, and retraction/metric projection act as the identity
    /// wherever they are defined.
    fn is_open_subset(&self) -> bool {
        matches!(*self, Manifold::FixedRank { rows, cols, rank } if rank == rows.min(cols))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Manifold::Sphere { dim } => dim >= 1,
            Manifold::Stiefel { rows, cols } => cols >= 1 && rows >= cols,
            Manifold::FixedRank { rows, cols, rank } => {
                rank >= 1 && rank <= rows.min(cols)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid manifold {}", self.name())))
        }
    }

    fn check_shape(&self, w: &AmbientTensor) -> Result<()> {
        if w.shape() != self.ambient_shape() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {:?}, got {:?}",
                self.name(),
                self.ambient_shape(),
                w.shape()
            )));
        }
        Ok(())
    }

    /// Distance-like measure of constraint violation. Infinite when a
    /// fixed-rank candidate has numerically collapsed rank.
    pub fn feasibility_residual(&self, w: &AmbientTensor) -> f64 {
        if w.shape() != self.ambient_shape() || !w.is_finite_all() {
            return f64::INFINITY;
        }
        match *self {
            Manifold::Sphere { .. } => (w.norm() - 1.0).abs(),
            Manifold::Stiefel { cols, .. } => {
                let g = w.tr_mul(w);
                let eye = AmbientTensor::from_fn(cols, cols, |i, j| f64::from(i == j));
                g.sub(&eye).norm()
            }
            Manifold::FixedRank { rank, .. } => match svd(w) {
                Ok(f) => {
                    if f.s[rank - 1] <= RANK_RATIO_TOL * f.s[0] {
                        return f64::INFINITY;
                    }
                    let tail: f64 = f.s[rank..].iter().map(|s| s * s).sum();
                    tail.sqrt() / w.norm().max(1.0)
                }
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// First-order displacement from a near-feasible `w` to the manifold:
    /// `w - displacement` is feasible to second order in the defect.
    ///
    /// Retractions and projections land within a few ulps of the manifold,
    /// but not on it; an objective whose ambient gradient is much larger
    /// than its Riemannian gradient amplifies that normal jitter far above
    /// the true per-step objective change near convergence. Knowing the
    /// displacement lets the linesearch evaluate objective differences as
    /// if iterates were exactly feasible. The Gram defect is accumulated
    /// with compensated dot products because the defect itself sits at the
    /// rounding floor of a naive accumulation.
    ///
    /// Returns `None` for fixed-rank, whose points are exact by
    /// construction (they are assembled from their thin SVD factors).
    pub fn feasibility_displacement(&self, w: &AmbientTensor) -> Option<AmbientTensor> {
        if w.shape() != self.ambient_shape() {
            return None;
        }
        match *self {
            Manifold::Sphere { .. } => {
                // w / ||w|| = w - w (||w||^2 - 1)/2 + O(defect^2).
                let mut acc = CompensatedSum::new();
                for v in w.iter() {
                    acc.add_product(*v, *v);
                }
                acc.add(-1.0);
                Some(w.scale(0.5 * acc.total()))
            }
            Manifold::Stiefel { cols, .. } => {
                // Polar projection: w (w^T w)^{-1/2} = w - w E/2 + O(E^2)
                // with E = w^T w - I, symmetric.
                let wm = w.na();
                let mut defect = AmbientTensor::zeros(cols, cols);
                for i in 0..cols {
                    for j in i..cols {
                        let mut acc = CompensatedSum::new();
                        let ci = wm.column(i);
                        let cj = wm.column(j);
                        for k in 0..w.rows() {
                            acc.add_product(ci[k], cj[k]);
                        }
                        if i == j {
                            acc.add(-1.0);
                        }
                        let e = acc.total();
                        defect.set(i, j, e);
                        defect.set(j, i, e);
                    }
                }
                Some(w.matmul(&defect).scale(0.5))
            }
            Manifold::FixedRank { .. } => None,
        }
    }

    /// Validate an ambient tensor as a point and attach caches.
    pub fn check_point(&self, w: AmbientTensor) -> Result<ManifoldPoint> {
        self.validate()?;
        self.check_shape(&w)?;
        let residual = self.feasibility_residual(&w);
        if !(residual <= FEASIBILITY_TOL) {
            return Err(Error::Infeasible { residual });
        }
        let factors = match *self {
            Manifold::FixedRank { rank, .. } => Some(svd(&w)?.truncate(rank)),
            _ => None,
        };
        Ok(ManifoldPoint {
            manifold: *self,
            ambient: w,
            factors,
        })
    }

    /// Orthogonal projection of `w` onto the tangent space at `x`.
    pub fn project_tangent(&self, x: &ManifoldPoint, w: &AmbientTensor) -> Result<TangentVector> {
        let ambient = self.project_tangent_raw(x, w)?;
        Ok(TangentVector {
            ambient,
            normal: false,
        })
    }

    fn project_tangent_raw(&self, x: &ManifoldPoint, w: &AmbientTensor) -> Result<AmbientTensor> {
        self.check_base(x)?;
        self.check_shape(w)?;
        match *self {
            Manifold::Sphere { .. } => {
                let inner = x.ambient.dot(w);
                Ok(w.add_scaled(-inner, &x.ambient))
            }
            Manifold::Stiefel { .. } => {
                let xtw = x.ambient.tr_mul(w);
                Ok(w.sub(&x.ambient.matmul(&sym(&xtw))))
            }
            // Full-rank case: the constraint set is open, the tangent space
            // is the whole ambient space, and projecting through the factors
            // would only inject rounding noise.
            Manifold::FixedRank { .. } if self.is_open_subset() => Ok(w.clone()),
            Manifold::FixedRank { .. } => {
                let f = x
                    .factors
                    .as_ref()
                    .expect("fixed-rank point always carries factors");
                // P(w) = U U^T w + w V V^T - U U^T w V V^T
                let utw = f.u.tr_mul(w);
                let wv = w.matmul(&f.v);
                let utwv = utw.matmul(&f.v);
                let mut out = f.u.matmul(&utw);
                out.axpy(1.0, &wv.matmul(&f.v.transpose()));
                out.axpy(-1.0, &f.u.matmul(&utwv.matmul(&f.v.transpose())));
                Ok(out)
            }
        }
    }

    /// Orthogonal projection of `w` onto the normal space at `x`.
    pub fn project_normal(&self, x: &ManifoldPoint, w: &AmbientTensor) -> Result<TangentVector> {
        let tangent = self.project_tangent_raw(x, w)?;
        Ok(TangentVector {
            ambient: w.sub(&tangent),
            normal: true,
        })
    }

    /// Retraction: feasible point approximating `x + v` to second order.
    pub fn retract(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
        self.check_base(x)?;
        self.check_shape(&v.ambient)?;
        // Contract: the zero step returns the base point bit-for-bit, so
        // renormalization/refactorization noise never moves a stationary
        // iterate.
        if v.ambient.iter().all(|&x| x == 0.0) {
            return Ok(x.clone());
        }
        let moved = x.ambient.add(&v.ambient);
        match *self {
            Manifold::Sphere { .. } => {
                let norm = moved.norm();
                if norm <= 1e-14 {
                    return Err(Error::RetractionDomain("sphere step through origin".into()));
                }
                Ok(ManifoldPoint {
                    manifold: *self,
                    ambient: moved.scale(1.0 / norm),
                    factors: None,
                })
            }
            Manifold::Stiefel { .. } => match polar_factor(&moved) {
                Ok(q) => Ok(ManifoldPoint {
                    manifold: *self,
                    ambient: q,
                    factors: None,
                }),
                Err(Error::RankDeficient { ratio }) => Err(Error::RetractionDomain(format!(
                    "stiefel step lost rank (ratio {ratio:.3e})"
                ))),
                Err(e) => Err(e),
            },
            Manifold::FixedRank { rank, .. } => {
                let f = svd(&moved)?;
                if f.s[rank - 1] <= RANK_RATIO_TOL * f.s[0] {
                    return Err(Error::RetractionDomain(format!(
                        "rank collapsed (s_r/s_1 = {:.3e})",
                        f.s[rank - 1] / f.s[0]
                    )));
                }
                let t = f.truncate(rank);
                // Full-rank case: `moved` is already the closest rank-`rank`
                // matrix, so keep it bit-for-bit and use the SVD only as the
                // rank certificate. Re-assembling from factors would shift
                // the point by ~eps * s_1, which dominates the objective
                // change of short steps near a minimizer.
                let ambient = if self.is_open_subset() { moved } else { t.reconstruct() };
                Ok(ManifoldPoint {
                    manifold: *self,
                    ambient,
                    factors: Some(t),
                })
            }
        }
    }

    /// Metric projection of an ambient tensor onto the manifold.
    pub fn project_manifold(&self, w: &AmbientTensor) -> Result<ManifoldPoint> {
        self.validate()?;
        self.check_shape(w)?;
        match *self {
            Manifold::Sphere { .. } => {
                let norm = w.norm();
                if norm <= 1e-14 {
                    return Err(Error::DegenerateProjection(
                        "cannot project the origin onto the sphere".into(),
                    ));
                }
                Ok(ManifoldPoint {
                    manifold: *self,
                    ambient: w.scale(1.0 / norm),
                    factors: None,
                })
            }
            Manifold::Stiefel { .. } => match polar_factor(w) {
                Ok(q) => Ok(ManifoldPoint {
                    manifold: *self,
                    ambient: q,
                    factors: None,
                }),
                Err(Error::RankDeficient { ratio }) => Err(Error::DegenerateProjection(format!(
                    "rank-deficient input (ratio {ratio:.3e})"
                ))),
                Err(e) => Err(e),
            },
            Manifold::FixedRank { rank, .. } => {
                let f = svd(w)?;
                if f.s[rank - 1] <= RANK_RATIO_TOL * f.s[0] {
                    return Err(Error::DegenerateProjection(format!(
                        "input has numerical rank below {rank}"
                    )));
                }
                let t = f.truncate(rank);
                // Full-rank case: `w` is its own metric projection (see
                // `retract` for why exactness matters).
                let ambient = if self.is_open_subset() { w.clone() } else { t.reconstruct() };
                Ok(ManifoldPoint {
                    manifold: *self,
                    ambient,
                    factors: Some(t),
                })
            }
        }
    }

    /// Random point: metric projection of an i.i.d. standard normal tensor.
    pub fn random_point(&self, rng: &mut Rng) -> Result<ManifoldPoint> {
        self.validate()?;
        let (r, c) = self.ambient_shape();
        for _ in 0..4 {
            let g = rng.normal_matrix(r, c);
            match self.project_manifold(&g) {
                Ok(p) => return Ok(p),
                Err(Error::DegenerateProjection(_)) | Err(Error::RankDeficient { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Numerical(
            "random sampling repeatedly produced degenerate points".into(),
        ))
    }

    fn check_base(&self, x: &ManifoldPoint) -> Result<()> {
        if x.manifold != *self {
            return Err(Error::DimensionMismatch(format!(
                "point lives on {}, expected {}",
                x.manifold.name(),
                self.name()
            )));
        }
        Ok(())
    }
}
