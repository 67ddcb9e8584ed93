//! Analytic and semi-analytic outage evaluators.
//!
//! * [`joint_pdf_series`] / [`joint_cdf_series`] / [`outage_theorem1`]: the
//!   exact truncated series for the joint envelope distribution (small `N`).
//! * [`outage_eq15`]: single-integral approximation built on the
//!   eps-rank channel model, usable for any `N`.
//! * [`outage_high_snr`]: the `Omega^{2N} / det J` asymptote.
//! * [`diversity_gain`], [`algorithm1_nstar`], [`flop_estimate`].

mod eq15;
mod series;

use serde::{Deserialize, Serialize};

use crate::correlation::{reference_rank_nprime, CorrelationModel, NPrimeConfig};
use crate::{FasError, Result};

pub use eq15::{eq15_exponent, outage_eq15};
pub use series::{
    indicator_weight, joint_cdf_series, joint_pdf_series, outage_theorem1, pair_from_index,
    pair_index, CdfValue, IndicatorTables, SeriesConfig, SeriesTerm, MAX_S0,
};

/// Outage threshold for a target rate `q` (bits/s/Hz) at transmit SNR:
/// outage means `|h| < omega` with `omega = sqrt((2^q - 1) / snr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageQuery {
    rate_q: f64,
    snr_linear: f64,
    omega: f64,
}

impl OutageQuery {
    pub fn new(rate_q: f64, snr_linear: f64) -> Result<Self> {
        if !(rate_q > 0.0) || !rate_q.is_finite() {
            return Err(FasError::domain(format!("rate q must be positive, got {rate_q}")));
        }
        if !(snr_linear > 0.0) {
            return Err(FasError::domain(format!("snr must be positive, got {snr_linear}")));
        }
        let omega = ((rate_q.exp2() - 1.0) / snr_linear).sqrt();
        Ok(OutageQuery { rate_q, snr_linear, omega })
    }

    pub fn from_db(rate_q: f64, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(FasError::domain(format!("snr must be finite, got {snr_db} dB")));
        }
        Self::new(rate_q, 10f64.powf(snr_db / 10.0))
    }

    /// The query whose threshold is exactly `omega` at rate `q`.
    pub fn from_omega(rate_q: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(FasError::domain(format!("omega must be positive, got {omega}")));
        }
        if !(rate_q > 0.0) || !rate_q.is_finite() {
            return Err(FasError::domain(format!("rate q must be positive, got {rate_q}")));
        }
        let snr_linear = (rate_q.exp2() - 1.0) / (omega * omega);
        Ok(OutageQuery { rate_q, snr_linear, omega })
    }

    pub fn rate_q(&self) -> f64 {
        self.rate_q
    }

    pub fn snr_linear(&self) -> f64 {
        self.snr_linear
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr_linear.log10()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn omega_sq(&self) -> f64 {
        self.omega * self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    Series { s0: usize },
    Eq15 { eps_rank: usize },
    Asymptote,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Series { .. } => "theorem1",
            Method::Eq15 { .. } => "eq15",
            Method::Asymptote => "asymptote",
        }
    }
}

/// A probability with its provenance. Monte Carlo estimates carry a binomial
/// standard error; deterministic methods report zero error and zero trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub trials: u64,
    pub method: Method,
    pub seed: Option<u64>,
}

impl OutageEstimate {
    pub(crate) fn deterministic(probability: f64, method: Method) -> Self {
        OutageEstimate { probability, std_error: 0.0, trials: 0, method, seed: None }
    }
}

/// `Omega^{2N} / det(J)`. Asymptotic in SNR; the value is not clamped and
/// exceeds 1 at low SNR.
pub fn outage_high_snr(model: &CorrelationModel, query: &OutageQuery) -> Result<f64> {
    require_regular(model)?;
    Ok(query.omega_sq().powi(model.n_ports() as i32) / model.det())
}

/// `min(N, N')`.
pub fn diversity_gain(model: &CorrelationModel, cfg: &NPrimeConfig) -> Result<usize> {
    if model.n_ports() == 1 {
        return Ok(1);
    }
    let nprime = reference_rank_nprime(model.width(), model.sigma2(), cfg)?;
    Ok(nprime.min(model.n_ports()))
}

/// Smallest port count whose leading eigenvalues capture all but `eps_tol`
/// of the per-port power, `eps_n = sigma2 - (1/N) sum_{i<=n} lambda_i`,
/// capped at the numerical rank of `J`.
pub fn algorithm1_nstar(model: &CorrelationModel, eps_tol: f64) -> Result<usize> {
    if !(eps_tol > 0.0) {
        return Err(FasError::domain(format!("eps_tol must be positive, got {eps_tol}")));
    }
    let lambda = model.eigvals();
    let n_total = model.n_ports() as f64;
    let rank = model.default_numerical_rank();
    let mut n = 1;
    let mut captured = lambda[0];
    let mut eps = model.sigma2() - captured / n_total;
    while eps_tol < eps && n < rank {
        captured += lambda[n];
        n += 1;
        eps = model.sigma2() - captured / n_total;
    }
    Ok(n)
}

/// Flop count of the port-count selection: `21 N^3 + 6 N^2 + (N*^2 + 3 N*) / 2`.
pub fn flop_estimate(n_ports: u64, n_star: u64) -> Result<u64> {
    if n_star > n_ports {
        return Err(FasError::domain(format!("n_star {n_star} exceeds n_ports {n_ports}")));
    }
    Ok(21 * n_ports.pow(3) + 6 * n_ports.pow(2) + (n_star * n_star + 3 * n_star) / 2)
}

pub(crate) fn require_regular(model: &CorrelationModel) -> Result<()> {
    if model.is_near_singular() {
        let n_star = algorithm1_nstar(model, 0.01 * model.sigma2()).unwrap_or(1);
        return Err(FasError::NearSingular {
            det: model.det(),
            condition: model.condition(),
            n_star,
        });
    }
    Ok(())
}
