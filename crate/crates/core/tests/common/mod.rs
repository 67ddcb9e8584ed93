//! Independent oracles shared by the integration tests. Nothing here calls
//! into the series or quadrature code under test.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson on `[a, b]` with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Joint envelope CDF of two unit-power complex Gaussians with correlation
/// `rho`, from the complex Gaussian density itself:
/// `f(r1, r2) = 2 r1 r2 / (pi det) int_0^{2pi} exp(-(r1^2 + r2^2 - 2 rho r1 r2 cos phi) / det) dphi`,
/// `det = 1 - rho^2`. The phase integral is a periodic trapezoid sum
/// (exponentially convergent); the radial integrals are adaptive Simpson.
pub fn bivariate_cdf_oracle(rho: f64, r1: f64, r2: f64) -> f64 {
    let det = 1.0 - rho * rho;
    let nodes = 96;
    let density = |x: f64, y: f64| {
        let mut s = 0.0;
        for k in 0..nodes {
            let phi = 2.0 * PI * k as f64 / nodes as f64;
            s += (-(x * x + y * y - 2.0 * rho * x * y * phi.cos()) / det).exp();
        }
        2.0 * x * y / (PI * det) * s * (2.0 * PI / nodes as f64)
    };
    let inner = |x: f64| simpson(&|y: f64| density(x, y), 0.0, r2, 1e-12);
    simpson(&inner, 0.0, r1, 1e-11)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Pair list `(m, n)`, `1 <= m < n <= N`, in row order.
pub fn pairs(n_ports: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for m in 1..=n_ports {
        for n in (m + 1)..=n_ports {
            out.push((m, n));
        }
    }
    out
}

/// Phase-balanced binomial weight by full enumeration of `v`.
pub fn brute_weight(n_ports: usize, orders: &[u8]) -> u64 {
    let pairs = pairs(n_ports);
    let mut v = vec![0u8; orders.len()];
    let mut total = 0u64;
    loop {
        let mut delta = vec![0i64; n_ports];
        let mut w = 1u64;
        for (t, &(m, n)) in pairs.iter().enumerate() {
            let g = 2 * v[t] as i64 - orders[t] as i64;
            delta[m - 1] += g;
            delta[n - 1] -= g;
            w *= binomial(orders[t] as u64, v[t] as u64);
        }
        if delta.iter().all(|&d| d == 0) {
            total += w;
        }
        let mut t = 0;
        loop {
            if t == v.len() {
                return total;
            }
            if v[t] < orders[t] {
                v[t] += 1;
                break;
            }
            v[t] = 0;
            t += 1;
        }
    }
}

/// Largest gap between the empirical CDFs of two samples (sorted in place).
pub fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
