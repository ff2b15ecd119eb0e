use crate::error::{Error, Result};

/// Relative residual bound guaranteed by [`positive_cubic_root`].
pub const CUBIC_RESIDUAL_REL: f64 = 1e-14;

/// Unique positive root of `a*t^3 + b*t - 1 = 0` for `a >= 0`, `b >= 1`.
///
/// The polynomial is strictly increasing with a sign change on `(0, 1/b]`,
/// so the root exists, is unique, and lies in `(0, 1]`. Newton iteration
/// started at `min(1, 1/b)` descends monotonically (the polynomial is convex
/// on `t > 0`); each step is safeguarded by the running sign-change bracket
/// and falls back to bisection if it ever leaves it.
pub fn positive_cubic_root(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 1.0 {
        return Err(Error::InvalidInput(format!(
            "positive_cubic_root requires a >= 0 and b >= 1, got a={a}, b={b}"
        )));
    }
    let phi = |t: f64| a * t * t * t + b * t - 1.0;
    let dphi = |t: f64| 3.0 * a * t * t + b;
    let scale = (a + b).max(1.0);

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut t = (1.0_f64 / b).min(1.0);
    for _ in 0..200 {
        let f = phi(t);
        if f.abs() <= CUBIC_RESIDUAL_REL * scale * 0.01 {
            return Ok(t);
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = f / dphi(t);
        let mut next = t - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= f64::EPSILON * t.abs() {
            t = next;
            break;
        }
        t = next;
    }
    if phi(t).abs() <= CUBIC_RESIDUAL_REL * scale {
        Ok(t)
    } else {
        Err(Error::Numerical(format!(
            "cubic root residual {:.3e} exceeds bound (a={a}, b={b})",
            phi(t).abs()
        )))
    }
}

const MAX_BRACKET_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// Root of a continuous scalar function on `[lo, hi]` by bisection.
///
/// If the initial interval does not bracket a sign change, `hi` is pushed
/// out geometrically (interval width doubles each time, up to 60 doublings)
/// before giving up. Stops when `|phi(root)| <= tol` or the bracket width
/// falls below `tol * max(1, |root|)`.
pub fn bracketed_scalar_root(
    phi: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid bracket [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let eval = |t: f64| -> Result<f64> {
        let v = phi(t);
        if v.is_nan() {
            Err(Error::NonFiniteRoot)
        } else {
            Ok(v)
        }
    };

    let f_lo = eval(lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let mut hi = hi;
    let mut f_hi = eval(hi)?;
    let mut doublings = 0;
    while f_hi != 0.0 && (f_hi > 0.0) == (f_lo > 0.0) {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::RootNotBracketed { doublings });
        }
        hi = lo + 2.0 * (hi - lo);
        if !hi.is_finite() {
            return Err(Error::RootNotBracketed { doublings });
        }
        f_hi = eval(hi)?;
        doublings += 1;
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    let mut a = lo;
    let mut b = hi;
    let mut mid = 0.5 * (a + b);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (a + b);
        let f_mid = eval(mid)?;
        if f_mid == 0.0 || f_mid.abs() <= tol {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) <= tol * mid.abs().max(1.0) {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(mid)
}
