//! Product-of-single-integrals outage approximation on the eps-rank model.
//!
//! Conditioned on its leading-mode component with power `r`, port `n` is
//! Rician with scatter `Psi_n^2 = sigma2 - sigma_n^2`, where
//! `sigma_n^2 = sum_{m <= eps} u_{n,m}^2 lambda_m`. Each port contributes
//!
//! ```text
//! I_n = int_0^inf exp(-r / sigma_n^2) / sigma_n^2
//!       * (1 - Q1(sqrt(2 r) / Psi_n, sqrt(2) Omega / Psi_n))^L dr
//! ```
//!
//! and the outage is `(prod_n I_n)^{1/L}` with the effective number of
//! independent ports `L = min(1.52 (N - 1) / (2 pi W), N)`, used as a real.

use std::f64::consts::{PI, SQRT_2};

use super::{Method, OutageEstimate, OutageQuery};
use crate::correlation::CorrelationModel;
use crate::quad::{integrate_pieces, QuadConfig};
use crate::specfun::marcum_q1;
use crate::{FasError, Result};

/// `e^{-u}` falls below 1e-14 past this many `sigma_n^2`.
const TAIL_CUTOFF: f64 = 32.3;
/// Below this `Psi_n^2 / sigma2` the Rician factor is a unit step at Omega.
const STEP_LIMIT: f64 = 1e-10;

/// `L = min(1.52 (N - 1) / (2 pi W), N)`.
pub fn eq15_exponent(n_ports: usize, width: f64) -> f64 {
    (1.52 * (n_ports as f64 - 1.0) / (2.0 * PI * width)).min(n_ports as f64)
}

pub fn outage_eq15(
    model: &CorrelationModel,
    query: &OutageQuery,
    eps_rank: usize,
    quad: &QuadConfig,
) -> Result<OutageEstimate> {
    let n = model.n_ports();
    if eps_rank == 0 || eps_rank > n {
        return Err(FasError::domain(format!("eps_rank must lie in 1..={n}, got {eps_rank}")));
    }
    let l = eq15_exponent(n, model.width());
    if !(l > 0.0) {
        return Err(FasError::domain("the product-integral approximation needs at least two ports"));
    }
    let method = Method::Eq15 { eps_rank };
    let omega = query.omega();
    if omega == 0.0 {
        return Ok(OutageEstimate::deterministic(0.0, method));
    }
    let lambda = model.eigvals();
    let u = model.eigvecs();
    let sigma2 = model.sigma2();

    let mut log_sum = 0.0;
    for port in 0..n {
        let captured: f64 = (0..eps_rank).map(|m| u[(port, m)].powi(2) * lambda[m]).sum();
        let psi2 = (sigma2 - captured).max(0.0);
        if captured <= 0.0 {
            return Err(FasError::domain(format!("port {port} receives no power from the leading modes")));
        }
        let step = omega * omega / captured;
        let value = if psi2 <= STEP_LIMIT * sigma2 {
            -(-step).exp_m1()
        } else {
            let psi = psi2.sqrt();
            let b = SQRT_2 * omega / psi;
            // u = r / sigma_n^2
            let f = |x: f64| {
                let a = (2.0 * x * captured).sqrt() / psi;
                let below = 1.0 - marcum_q1(a, b).unwrap_or(1.0);
                (-x).exp() * below.max(0.0).powf(l)
            };
            let mut points = vec![0.0];
            if step < TAIL_CUTOFF {
                points.push(step);
            }
            points.push(TAIL_CUTOFF.max(2.0 * step));
            integrate_pieces(f, &points, quad)?.value
        };
        if value <= 0.0 {
            return Ok(OutageEstimate::deterministic(0.0, method));
        }
        log_sum += value.ln();
    }
    let p = (log_sum / l).exp().clamp(0.0, 1.0);
    Ok(OutageEstimate::deterministic(p, method))
}
