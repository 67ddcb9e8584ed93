use crate::quad::{integrate, QuadConfig};
use crate::specfun::bessel_i0_scaled;
use crate::{FasError, Result};

/// Above this value of `a * b` the Bessel series is replaced by direct
/// quadrature of the defining integral.
pub const MARCUM_SERIES_LIMIT: f64 = 30.0;

/// First-order Marcum Q function
/// `Q1(a, b) = int_b^inf x exp(-(x^2 + a^2)/2) I0(a x) dx`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(FasError::domain(format!(
            "marcum_q1 needs finite non-negative arguments, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-0.5 * b * b).exp());
    }
    let q = if a * b <= MARCUM_SERIES_LIMIT {
        series(a, b)
    } else {
        quadrature(a, b)?
    };
    Ok(q.clamp(0.0, 1.0))
}

/// `e^{-(a²+b²)/2} sum_{k>=k0} (x/y)^k I_k(ab)` with `(x, y)` = `(a, b)` for Q1 itself
/// (k0 = 0, a < b) and `(b, a)` for 1 - Q1 (k0 = 1, a >= b).
///
/// Truncation uses `I_k(z) <= (z/2)^k / k! * exp(z² / (4(k+1)))`, which bounds
/// the k-th term by `(x²/2)^k / k! * exp(z²/(4(k+1)))`; once `k + 1 > x²/2` the
/// remaining tail is dominated by a geometric series.
fn series(a: f64, b: f64) -> f64 {
    let z = a * b;
    let pref = (-0.5 * (a * a + b * b)).exp();
    let (x, y, k0) = if a < b { (a, b, 0) } else { (b, a, 1) };
    let ratio = x / y;
    let half_x2 = 0.5 * x * x;
    let mut sum = 0.0;
    let mut bound_k = 1.0; // (x²/2)^k / k!
    let mut ratio_k = 1.0; // (x/y)^k
    for k in 0..2000usize {
        if k > 0 {
            bound_k *= half_x2 / k as f64;
            ratio_k *= ratio;
        }
        if k >= k0 {
            sum += ratio_k * bessel_in(k, z);
        }
        let kk = (k + 1) as f64;
        if kk > half_x2 {
            let next_ratio = half_x2 / kk;
            let tail = bound_k * next_ratio / (1.0 - next_ratio) * (z * z / (4.0 * kk)).exp();
            if pref * tail < 1e-17 {
                break;
            }
        }
    }
    if k0 == 0 {
        pref * sum
    } else {
        1.0 - pref * sum
    }
}

/// Modified Bessel function I_k(z) by its power series (all terms positive).
fn bessel_in(k: usize, z: f64) -> f64 {
    let h = 0.5 * z;
    let mut lead = 1.0;
    for j in 1..=k {
        lead *= h / j as f64;
    }
    if lead == 0.0 {
        return 0.0;
    }
    let q = h * h;
    let mut term = lead;
    let mut sum = lead;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (m + k as f64));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Integrates whichever of Q1 and 1 - Q1 has the shorter support, with the
/// Bessel factor kept in scaled form: x e^{-(x-a)²/2} [e^{-ax} I0(ax)].
fn quadrature(a: f64, b: f64) -> Result<f64> {
    let f = |x: f64| x * (-0.5 * (x - a) * (x - a)).exp() * bessel_i0_scaled(a * x);
    let cfg = QuadConfig { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 500 };
    const SPAN: f64 = 14.0; // e^{-98} below the peak
    if b <= a {
        let lo = (a - SPAN).max(0.0);
        if b <= lo {
            return Ok(1.0);
        }
        Ok(1.0 - integrate(f, lo, b, &cfg)?.value)
    } else {
        let hi = b.max(a) + SPAN;
        Ok(integrate(f, b, hi, &cfg)?.value)
    }
}
