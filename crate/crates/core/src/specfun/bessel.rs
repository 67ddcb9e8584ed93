use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{FasError, Result};

/// Arguments with `|x|` at or below this use the power series; above it the
/// Hankel asymptotic expansion. Both branches agree to ~1e-12 here.
pub const J0_SERIES_LIMIT: f64 = 12.0;

/// Zero-order Bessel function of the first kind.
///
/// Absolute error below 1e-10 for `|x| <= 1e4`. Evaluated on `|x|`, so
/// `bessel_j0(-x) == bessel_j0(x)` bit for bit.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(FasError::domain(format!("bessel_j0 argument must be finite, got {x}")));
    }
    let ax = x.abs();
    if ax <= J0_SERIES_LIMIT {
        Ok(j0_series(ax))
    } else {
        Ok(j0_asymptotic(ax))
    }
}

pub(crate) fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > q.sqrt() {
            break;
        }
        if k > 200.0 {
            break;
        }
    }
    sum
}

/// Hankel expansion `sqrt(2/(pi x)) (P cos chi - Q sin chi)`, chi = x - pi/4,
/// summed until the terms stop decreasing.
pub(crate) fn j0_asymptotic(x: f64) -> f64 {
    let inv8x = 1.0 / (8.0 * x);
    // a_k = prod_{j=1..k} (2j-1)^2 / (k! (8x)^k), alternating into P (even k) and Q (odd k).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let next = a * (2.0 * kf - 1.0).powi(2) * inv8x / kf;
        if next.abs() >= prev || next.abs() < 1e-18 {
            break;
        }
        prev = next.abs();
        a = next;
        // signs: P = a0 - a2 + a4 - ..., Q = -a1 + a3 - ... (J0 convention)
        match k % 4 {
            1 => q -= a,
            2 => p -= a,
            3 => q += a,
            _ => p += a,
        }
    }
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * FRAC_1_SQRT_2;
    let sin_chi = (s - c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Exponentially scaled modified Bessel function `exp(-x) I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 20.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // exp(-x) I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
        let inv8x = 1.0 / (8.0 * x);
        let mut a = 1.0f64;
        let mut sum = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            let next = a * (2.0 * kf - 1.0).powi(2) * inv8x / kf;
            if next >= a || next < 1e-18 * sum {
                break;
            }
            a = next;
            sum += a;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}
