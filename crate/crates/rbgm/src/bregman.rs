//! Convex reference functions and their Bregman distances
//! `D_h(y, x) = h(y) - h(x) - <grad h(x), y - x>`.
//!
//! Four reference functions are provided. The quadratic recovers the
//! Euclidean setup. The quartic `||x||^4 / 4 + ||x||^2 / 2` is the natural
//! choice for objectives whose Hessian grows quadratically with the iterate
//! norm. The log barrier and negative entropy live on the open positive
//! orthant; their strong convexity modulus is only bounded on a box, so
//! their constructors take the box upper bound `U` and record
//! `lambda = 1/U^2` (barrier) resp. `1/U` (entropy). Quadratic and quartic
//! are globally 1-strongly convex.
//!
//! Points outside the domain are reported as hard errors carrying the first
//! offending index, never as infinite values.

use crate::error::{Error, Result};
use crate::numerics::{positive_cubic_root, AmbientTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Quadratic,
    Quartic,
    LogBarrier,
    Entropy,
}

/// A reference function `h` with its strong convexity modulus `lambda`.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceFunction {
    kind: ReferenceKind,
    lambda: f64,
}

/// Bregman distance value along with the gradient of `h` at the base
/// point, which callers typically need again.
#[derive(Clone, Debug)]
pub struct BregmanEval {
    pub value: f64,
    pub grad_at_base: AmbientTensor,
}

impl ReferenceFunction {
    /// `h(x) = ||x||^2 / 2`.
    pub fn quadratic() -> Self {
        Self {
            kind: ReferenceKind::Quadratic,
            lambda: 1.0,
        }
    }

    /// `h(x) = ||x||^4 / 4 + ||x||^2 / 2`.
    pub fn quartic() -> Self {
        Self {
            kind: ReferenceKind::Quartic,
            lambda: 1.0,
        }
    }

    /// `h(x) = -sum_i log x_i` on the open positive orthant; `upper` is the
    /// box bound on which strong convexity is certified.
    pub fn log_barrier(upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::InvalidInput(format!(
                "log barrier needs a positive finite box bound, got {upper}"
            )));
        }
        Ok(Self {
            kind: ReferenceKind::LogBarrier,
            lambda: 1.0 / (upper * upper),
        })
    }

    /// `h(x) = sum_i x_i log x_i` on the open positive orthant.
    pub fn entropy(upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::InvalidInput(format!(
                "entropy needs a positive finite box bound, got {upper}"
            )));
        }
        Ok(Self {
            kind: ReferenceKind::Entropy,
            lambda: 1.0 / upper,
        })
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    /// Strong convexity modulus on the certified domain.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn requires_positive_orthant(&self) -> bool {
        matches!(self.kind, ReferenceKind::LogBarrier | ReferenceKind::Entropy)
    }

    /// First index violating the domain, if any.
    pub fn domain_check(&self, x: &AmbientTensor) -> Result<()> {
        if self.requires_positive_orthant() {
            for (index, v) in x.data_row_major().into_iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::DomainViolation { index });
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &AmbientTensor) -> Result<f64> {
        self.domain_check(x)?;
        let v = match self.kind {
            ReferenceKind::Quadratic => 0.5 * x.norm_squared(),
            ReferenceKind::Quartic => {
                let n2 = x.norm_squared();
                0.25 * n2 * n2 + 0.5 * n2
            }
            ReferenceKind::LogBarrier => -x.iter().map(|v| v.ln()).sum::<f64>(),
            ReferenceKind::Entropy => x.iter().map(|v| v * v.ln()).sum::<f64>(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical("reference value overflowed".into()))
        }
    }

    pub fn grad(&self, x: &AmbientTensor) -> Result<AmbientTensor> {
        self.domain_check(x)?;
        let g = match self.kind {
            ReferenceKind::Quadratic => x.clone(),
            ReferenceKind::Quartic => x.scale(x.norm_squared() + 1.0),
            ReferenceKind::LogBarrier => x.map(|v| -1.0 / v),
            ReferenceKind::Entropy => x.map(|v| v.ln() + 1.0),
        };
        if g.is_finite_all() {
            Ok(g)
        } else {
            Err(Error::Numerical("reference gradient overflowed".into()))
        }
    }

    /// `D_h(y, x)` together with `grad h(x)`.
    pub fn bregman(&self, y: &AmbientTensor, x: &AmbientTensor) -> Result<BregmanEval> {
        if y.shape() != x.shape() {
            return Err(Error::DimensionMismatch(format!(
                "bregman distance of {:?} vs {:?}",
                y.shape(),
                x.shape()
            )));
        }
        let grad_at_base = self.grad(x)?;
        let value = self.value(y)? - self.value(x)? - grad_at_base.dot(&y.sub(x));
        if !value.is_finite() {
            return Err(Error::Numerical("bregman distance overflowed".into()));
        }
        Ok(BregmanEval {
            value,
            grad_at_base,
        })
    }

    /// Solve `grad h(y) = t` for `y`. Exact inversion per kind: identity,
    /// a scalar cubic (quartic), and elementwise formulas (barrier,
    /// entropy). Errors when `t` is not in the gradient's range.
    pub fn grad_inverse(&self, t: &AmbientTensor) -> Result<AmbientTensor> {
        let y = match self.kind {
            ReferenceKind::Quadratic => t.clone(),
            ReferenceKind::Quartic => {
                // y = theta * t with ||t||^2 theta^3 + theta = 1.
                let theta = positive_cubic_root(t.norm_squared(), 1.0)?;
                t.scale(theta)
            }
            ReferenceKind::LogBarrier => {
                for (index, v) in t.data_row_major().into_iter().enumerate() {
                    if !(v < 0.0) {
                        return Err(Error::DomainViolation { index });
                    }
                }
                t.map(|v| -1.0 / v)
            }
            ReferenceKind::Entropy => t.map(|v| (v - 1.0).exp()),
        };
        if y.is_finite_all() {
            Ok(y)
        } else {
            Err(Error::Numerical("gradient inversion overflowed".into()))
        }
    }
}
