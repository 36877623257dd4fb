//! Fixed-step RK4 and bisection localization of a predicate's sign change.

use super::{NumError, Vector};

/// One classical Runge-Kutta step of size `h` for x' = f(t, x).
///
/// Every stage derivative is checked for finiteness; a NaN or infinity
/// anywhere aborts with `NonFiniteDerivative` carrying the stage time.
pub fn rk4_step<F>(f: &F, t: f64, x: &Vector, h: f64) -> Result<Vector, NumError>
where
    F: Fn(f64, &Vector) -> Vector,
{
    let stage = |tq: f64, xq: &Vector| -> Result<Vector, NumError> {
        let k = f(tq, xq);
        if k.is_finite() {
            Ok(k)
        } else {
            Err(NumError::NonFiniteDerivative { t: tq })
        }
    };
    let k1 = stage(t, x)?;
    let k2 = stage(t + 0.5 * h, &x.add_scaled(0.5 * h, &k1))?;
    let k3 = stage(t + 0.5 * h, &x.add_scaled(0.5 * h, &k2))?;
    let k4 = stage(t + h, &x.add_scaled(h, &k3))?;
    let mut sum = k1.add_scaled(2.0, &k2);
    sum = sum.add_scaled(2.0, &k3);
    sum = sum.add_scaled(1.0, &k4);
    let next = x.add_scaled(h / 6.0, &sum);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(NumError::NonFiniteDerivative { t: t + h })
    }
}

/// Bisection of a sign change of `g` over [t_lo, t_hi], to within `tol`.
///
/// The canonical bracket is g(t_lo) <= 0 < g(t_hi); the mirrored bracket
/// is accepted too. Two strictly same-signed ends are `NoSignChange`.
pub fn locate_event<G>(g: &G, t_lo: f64, t_hi: f64, tol: f64) -> Result<f64, NumError>
where
    G: Fn(f64) -> f64,
{
    assert!(t_lo <= t_hi, "locate_event: inverted bracket");
    assert!(tol > 0.0, "locate_event: tolerance must be positive");
    let g_lo = g(t_lo);
    let g_hi = g(t_hi);
    if g_lo * g_hi > 0.0 {
        return Err(NumError::NoSignChange);
    }
    // Orient so the non-positive end is `lo`.
    let (mut lo, mut hi, flip) = if g_lo <= 0.0 {
        (t_lo, t_hi, false)
    } else {
        (t_lo, t_hi, true)
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at floating-point resolution
        }
        let gm = if flip { -g(mid) } else { g(mid) };
        if gm <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
