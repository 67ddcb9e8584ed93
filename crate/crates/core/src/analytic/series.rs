//! Truncated series for the joint envelope PDF and CDF of a correlated
//! complex Gaussian vector.
//!
//! Expanding the off-diagonal part of the exponent and integrating out the
//! phases leaves one term per multi-index `s = (s_1, ..., s_T)` over the
//! `T = N(N-1)/2` port pairs. Each pair `t = (m, n)` contributes
//! `cos(theta_m - theta_n)^{s_t}`; writing the power as a binomial sum over
//! `v_t` gives a net frequency `2 v_t - s_t` on `theta_m` and its negative on
//! `theta_n`. Only assignments whose net frequency vanishes at every port
//! survive the phase integrals, and their binomial products sum to the
//! integer weight `w(s)`. The series keeps every `s` with `sum s_t <= s0`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{require_regular, Method, OutageEstimate, OutageQuery};
use crate::correlation::CorrelationModel;
use crate::specfun::gamma_lower_upper;
use crate::{FasError, Result};

/// Weights are bounded by `2^s0` and must fit a `u64`.
pub const MAX_S0: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Largest total order `sum_t s_t` kept.
    pub s0: usize,
    /// Evaluation is refused above this port count.
    pub max_ports: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { s0: 20, max_ports: 4 }
    }
}

/// 1-based pair index of ports `m < n` (1-based) among `N` ports, in the order
/// (1,2), (1,3), ..., (1,N), (2,3), ...
pub fn pair_index(n_ports: usize, m: usize, n: usize) -> usize {
    debug_assert!(1 <= m && m < n && n <= n_ports);
    n + (m - 1) * n_ports - m * (m + 1) / 2
}

/// Inverse of [`pair_index`]: `m` is the smallest `m'` with
/// `sum_{i<=m'} (N - i) >= t`.
pub fn pair_from_index(n_ports: usize, t: usize) -> (usize, usize) {
    debug_assert!(t >= 1 && t <= n_ports * (n_ports - 1) / 2);
    let mut before = 0;
    let mut m = 1;
    while before + (n_ports - m) < t {
        before += n_ports - m;
        m += 1;
    }
    (m, m + (t - before))
}

/// One surviving multi-index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesTerm {
    /// `s_t` per pair, in [`pair_index`] order.
    pub orders: Vec<u8>,
    /// Per-port degree `d_n`: total order of the pairs touching port `n`.
    pub degrees: Vec<u8>,
    /// `w(s)`, the number of phase-balanced binomial assignments.
    pub weight: u64,
}

impl SeriesTerm {
    pub fn total(&self) -> usize {
        self.orders.iter().map(|&s| s as usize).sum()
    }

    /// `g(s) = (2 pi)^N (1/2)^{sum s} w(s)`.
    pub fn g(&self, n_ports: usize) -> f64 {
        (2.0 * PI).powi(n_ports as i32) * 0.5f64.powi(self.total() as i32) * self.weight as f64
    }
}

/// All nonzero-weight multi-indices for `(N, s0)`.
#[derive(Debug)]
pub struct IndicatorTables {
    pub n_ports: usize,
    pub s0: usize,
    pub pairs: Vec<(usize, usize)>,
    pub terms: Vec<SeriesTerm>,
}

impl IndicatorTables {
    /// Shared, memoized tables.
    pub fn get(n_ports: usize, s0: usize) -> Arc<IndicatorTables> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<IndicatorTables>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().unwrap().get(&(n_ports, s0)) {
            return Arc::clone(t);
        }
        // built outside the lock; a racing duplicate build is harmless
        let built = Arc::new(Self::build(n_ports, s0));
        let mut guard = cache.lock().unwrap();
        Arc::clone(guard.entry((n_ports, s0)).or_insert(built))
    }

    fn build(n_ports: usize, s0: usize) -> IndicatorTables {
        assert!(s0 <= MAX_S0, "s0 too large");
        let t_count = n_ports * n_ports.saturating_sub(1) / 2;
        let pairs: Vec<(usize, usize)> = (1..=t_count).map(|t| pair_from_index(n_ports, t)).collect();
        let mut terms = Vec::new();
        let mut orders = vec![0u8; t_count];
        enumerate(&pairs, n_ports, 0, s0, &mut orders, &mut terms);
        IndicatorTables { n_ports, s0, pairs, terms }
    }

    pub fn weight_of(&self, orders: &[u8]) -> Option<u64> {
        self.terms.iter().find(|t| t.orders == orders).map(|t| t.weight)
    }
}

fn enumerate(
    pairs: &[(usize, usize)],
    n_ports: usize,
    t: usize,
    budget: usize,
    orders: &mut Vec<u8>,
    out: &mut Vec<SeriesTerm>,
) {
    if t == pairs.len() {
        let mut degrees = vec![0u8; n_ports];
        for (&(m, n), &s) in pairs.iter().zip(orders.iter()) {
            degrees[m - 1] += s;
            degrees[n - 1] += s;
        }
        if degrees.iter().any(|d| d % 2 == 1) {
            return;
        }
        let weight = indicator_weight(n_ports, orders);
        if weight > 0 {
            out.push(SeriesTerm { orders: orders.clone(), degrees, weight });
        }
        return;
    }
    for s in 0..=budget {
        orders[t] = s as u8;
        enumerate(pairs, n_ports, t + 1, budget - s, orders, out);
    }
    orders[t] = 0;
}

/// `w(s) = sum over v with 0 <= v_t <= s_t of prod_t C(s_t, v_t)`, restricted
/// to assignments where every port's net phase frequency is zero.
pub fn indicator_weight(n_ports: usize, orders: &[u8]) -> u64 {
    let t_count = orders.len();
    assert_eq!(t_count, n_ports * n_ports.saturating_sub(1) / 2, "orders length must be N(N-1)/2");
    let pairs: Vec<(usize, usize)> = (1..=t_count).map(|t| pair_from_index(n_ports, t)).collect();
    // capacity[t][i]: how far pairs t.. can still move port i's balance
    let mut capacity = vec![vec![0i64; n_ports]; t_count + 1];
    for t in (0..t_count).rev() {
        capacity[t] = capacity[t + 1].clone();
        let (m, n) = pairs[t];
        capacity[t][m - 1] += orders[t] as i64;
        capacity[t][n - 1] += orders[t] as i64;
    }
    let mut balance = vec![0i64; n_ports];
    weight_dfs(&pairs, orders, &capacity, 0, &mut balance)
}

fn weight_dfs(
    pairs: &[(usize, usize)],
    orders: &[u8],
    capacity: &[Vec<i64>],
    t: usize,
    balance: &mut [i64],
) -> u64 {
    if balance.iter().zip(&capacity[t]).any(|(b, c)| b.abs() > *c) {
        return 0;
    }
    if t == pairs.len() {
        return 1;
    }
    let (m, n) = (pairs[t].0 - 1, pairs[t].1 - 1);
    let s = orders[t] as u64;
    let mut total = 0;
    let mut binom = 1u64;
    for v in 0..=s {
        if v > 0 {
            binom = (binom as u128 * (s - v + 1) as u128 / v as u128) as u64;
        }
        let shift = 2 * v as i64 - s as i64;
        balance[m] += shift;
        balance[n] -= shift;
        total += binom * weight_dfs(pairs, orders, capacity, t + 1, balance);
        balance[m] -= shift;
        balance[n] += shift;
    }
    total
}

fn check_series(model: &CorrelationModel, values: &[f64], cfg: &SeriesConfig) -> Result<()> {
    let n = model.n_ports();
    if n > cfg.max_ports {
        return Err(FasError::SeriesCap { n_ports: n, max_ports: cfg.max_ports });
    }
    if cfg.s0 > MAX_S0 {
        return Err(FasError::domain(format!("s0 must not exceed {MAX_S0}, got {}", cfg.s0)));
    }
    if values.len() != n {
        return Err(FasError::domain(format!("expected {n} values, got {}", values.len())));
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(FasError::domain("envelopes and radii must be finite and non-negative"));
    }
    require_regular(model)
}

/// Joint density of `(|h_1|, ..., |h_N|)` at `envelopes`.
pub fn joint_pdf_series(model: &CorrelationModel, envelopes: &[f64], cfg: &SeriesConfig) -> Result<f64> {
    check_series(model, envelopes, cfg)?;
    let n = model.n_ports();
    if envelopes.contains(&0.0) {
        return Ok(0.0);
    }
    let k = model.cofactor().expect("regular model has a cofactor matrix");
    let det = model.det();
    let tables = IndicatorTables::get(n, cfg.s0);

    let mut exponent = 0.0;
    let mut radial = 1.0;
    for i in 0..n {
        exponent -= k[(i, i)] * envelopes[i] * envelopes[i] / det;
        radial *= envelopes[i];
    }
    // beta[t][s] = (zeta_t / 2)^s / s!, the 1/2 taken from g
    let betas: Vec<Vec<f64>> = tables
        .pairs
        .iter()
        .map(|&(m, j)| {
            let half_zeta = -k[(m - 1, j - 1)] * envelopes[m - 1] * envelopes[j - 1] / det;
            power_table(half_zeta, cfg.s0)
        })
        .collect();
    let mut sum = 0.0;
    for term in &tables.terms {
        let mut p = term.weight as f64;
        for (t, &s) in term.orders.iter().enumerate() {
            p *= betas[t][s as usize];
        }
        sum += p;
    }
    // (2 pi)^N / pi^N = 2^N
    Ok((2f64.powi(n as i32) / det * radial * exponent.exp() * sum).max(0.0))
}

/// CDF value with the pre-clamp series sum kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfValue {
    pub value: f64,
    pub raw: f64,
}

/// `P(|h_1| < R_1, ..., |h_N| < R_N)`.
pub fn joint_cdf_series(model: &CorrelationModel, radii: &[f64], cfg: &SeriesConfig) -> Result<CdfValue> {
    check_series(model, radii, cfg)?;
    let n = model.n_ports();
    if radii.contains(&0.0) {
        return Ok(CdfValue { value: 0.0, raw: 0.0 });
    }
    let k = model.cofactor().expect("regular model has a cofactor matrix");
    let det = model.det();
    let tables = IndicatorTables::get(n, cfg.s0);

    // gammas[i][j] = lower incomplete gamma(j + 1, K_ii R_i^2 / det)
    let mut gammas = Vec::with_capacity(n);
    let mut prefactor = det.powi(n as i32 - 1);
    for i in 0..n {
        let kii = k[(i, i)];
        prefactor /= kii;
        let x = kii * radii[i] * radii[i] / det;
        let mut row = Vec::with_capacity(cfg.s0 + 1);
        for j in 0..=cfg.s0 {
            row.push(gamma_lower_upper(j as f64 + 1.0, x)?.0);
        }
        gammas.push(row);
    }
    let kappas: Vec<Vec<f64>> = tables
        .pairs
        .iter()
        .map(|&(m, j)| {
            let (m, j) = (m - 1, j - 1);
            power_table(-k[(m, j)] / (k[(m, m)] * k[(j, j)]).sqrt(), cfg.s0)
        })
        .collect();

    let mut sum = 0.0;
    for term in &tables.terms {
        let mut p = term.weight as f64;
        for (t, &s) in term.orders.iter().enumerate() {
            p *= kappas[t][s as usize];
        }
        for (i, &d) in term.degrees.iter().enumerate() {
            p *= gammas[i][d as usize / 2];
        }
        sum += p;
    }
    let raw = prefactor * sum;
    Ok(CdfValue { value: raw.clamp(0.0, 1.0), raw })
}

/// `[x^s / s!]` for `s = 0..=s_max`.
fn power_table(x: f64, s_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(s_max + 1);
    let mut v = 1.0;
    out.push(v);
    for s in 1..=s_max {
        v *= x / s as f64;
        out.push(v);
    }
    out
}

/// Outage as the joint CDF with every radius equal to `Omega`.
pub fn outage_theorem1(model: &CorrelationModel, query: &OutageQuery, cfg: &SeriesConfig) -> Result<OutageEstimate> {
    let radii = vec![query.omega(); model.n_ports()];
    let cdf = joint_cdf_series(model, &radii, cfg)?;
    Ok(OutageEstimate::deterministic(cdf.value, Method::Series { s0: cfg.s0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_j0;
    use proptest::prelude::*;

    /// Direct enumeration of every v with the balance condition, no pruning.
    fn brute_weight(n_ports: usize, orders: &[u8]) -> u64 {
        let pairs: Vec<(usize, usize)> = (1..=orders.len()).map(|t| pair_from_index(n_ports, t)).collect();
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
            // odometer
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

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn pair_mapping_examples() {
        assert_eq!(pair_index(3, 1, 2), 1);
        assert_eq!(pair_index(3, 1, 3), 2);
        assert_eq!(pair_index(3, 2, 3), 3);
        assert_eq!(pair_from_index(4, 3), (1, 4));
        assert_eq!(pair_from_index(4, 4), (2, 3));
        assert_eq!(pair_from_index(4, 6), (3, 4));
    }

    proptest! {
        #[test]
        fn pair_mapping_round_trips(n in 2usize..40, seed in 0usize..10_000) {
            let t_count = n * (n - 1) / 2;
            let t = 1 + seed % t_count;
            let (m, j) = pair_from_index(n, t);
            prop_assert!(1 <= m && m < j && j <= n);
            prop_assert_eq!(pair_index(n, m, j), t);
        }

        #[test]
        fn weights_match_brute_force(orders in proptest::collection::vec(0u8..5, 6)) {
            prop_assert_eq!(indicator_weight(4, &orders), brute_weight(4, &orders));
        }
    }

    #[test]
    fn two_port_terms_are_central_binomials() {
        let tables = IndicatorTables::get(2, 20);
        assert_eq!(tables.terms.len(), 11);
        for (k, term) in tables.terms.iter().enumerate() {
            assert_eq!(term.orders, vec![2 * k as u8]);
            assert_eq!(term.weight, binomial(2 * k as u64, k as u64));
            assert_eq!(term.weight, brute_weight(2, &term.orders));
        }
        for s in 0..=21u8 {
            let expect = if s % 2 == 0 { binomial(s as u64, s as u64 / 2) } else { 0 };
            assert_eq!(indicator_weight(2, &[s]), expect);
        }
    }

    #[test]
    fn three_port_tables_match_brute_force() {
        let tables = IndicatorTables::get(3, 10);
        let mut count = 0;
        for a in 0..=10u8 {
            for b in 0..=(10 - a) {
                for c in 0..=(10 - a - b) {
                    let orders = [a, b, c];
                    let w = brute_weight(3, &orders);
                    assert_eq!(tables.weight_of(&orders).unwrap_or(0), w, "{orders:?}");
                    count += (w > 0) as usize;
                }
            }
        }
        assert_eq!(count, tables.terms.len());
    }

    #[test]
    fn zero_index_weight() {
        for n in 1..=4 {
            let tables = IndicatorTables::get(n, 4);
            let zero = &tables.terms[0];
            assert!(zero.orders.iter().all(|&s| s == 0));
            assert_eq!(zero.g(n), (2.0 * PI).powi(n as i32));
        }
    }

    #[test]
    fn single_port_is_rayleigh() {
        let m = CorrelationModel::new(1, 0.5, 1.0).unwrap();
        let cfg = SeriesConfig::default();
        let pdf = joint_pdf_series(&m, &[1.0], &cfg).unwrap();
        assert!((pdf - 2.0 * (-1f64).exp()).abs() < 1e-15);
        let cdf = joint_cdf_series(&m, &[1.2], &cfg).unwrap();
        assert!((cdf.value - (1.0 - (-1.44f64).exp())).abs() < 1e-15);
        let m = CorrelationModel::new(1, 0.5, 2.0).unwrap();
        let pdf = joint_pdf_series(&m, &[0.7], &cfg).unwrap();
        assert!((pdf - 0.7 * (-0.49f64 / 2.0).exp()).abs() < 1e-15);
    }

    /// Classical bivariate Rayleigh CDF,
    /// (1 - rho^2) sum_k rho^{2k} P(k+1, x1) P(k+1, x2), x_i = R_i^2 / (1 - rho^2).
    fn bivariate_rayleigh_cdf(rho: f64, r1: f64, r2: f64) -> f64 {
        let q = 1.0 - rho * rho;
        let p = |k: usize, x: f64| statrs::function::gamma::gamma_lr(k as f64 + 1.0, x);
        (0..200).map(|k| rho.powi(2 * k as i32) * p(k, r1 * r1 / q) * p(k, r2 * r2 / q)).sum::<f64>() * q
    }

    #[test]
    fn two_port_cdf_matches_classical_series() {
        let cfg = SeriesConfig::default();
        for w in [0.5, 1.0, 0.2] {
            let m = CorrelationModel::new(2, w, 1.0).unwrap();
            let rho = bessel_j0(2.0 * PI * w).unwrap();
            for (r1, r2) in [(0.5, 0.5), (1.0, 0.3), (1.5, 2.0)] {
                let v = joint_cdf_series(&m, &[r1, r2], &cfg).unwrap();
                let o = bivariate_rayleigh_cdf(rho, r1, r2);
                // rho = J0(0.4 pi) ~ 0.64 converges slowest
                assert!((v.raw - o).abs() < 1e-5, "W={w} R=({r1},{r2}): {} vs {o}", v.raw);
            }
        }
    }

    #[test]
    fn zeroth_order_term() {
        let cfg = SeriesConfig { s0: 0, max_ports: 4 };
        let m = CorrelationModel::new(3, 1.0, 1.0).unwrap();
        let k = m.cofactor().unwrap();
        let r = [0.4, 0.9, 1.3];
        let det = m.det();
        let mut expect = det.powi(2);
        for i in 0..3 {
            expect *= (1.0 - (-k[(i, i)] * r[i] * r[i] / det).exp()) / k[(i, i)];
        }
        let v = joint_cdf_series(&m, &r, &cfg).unwrap();
        assert!((v.raw - expect).abs() < 1e-14);
    }

    #[test]
    fn total_probability() {
        let cfg = SeriesConfig::default();
        for (n, w) in [(2, 0.5), (2, 1.0), (3, 1.0)] {
            let m = CorrelationModel::new(n, w, 1.0).unwrap();
            let v = joint_cdf_series(&m, &vec![10.0; n], &cfg).unwrap();
            assert!((v.raw - 1.0).abs() < 1e-6, "N={n} W={w}: {}", v.raw);
        }
    }

    #[test]
    fn zero_envelope_gives_zero() {
        let cfg = SeriesConfig::default();
        let m = CorrelationModel::new(3, 1.0, 1.0).unwrap();
        assert_eq!(joint_pdf_series(&m, &[0.0, 1.0, 1.0], &cfg).unwrap(), 0.0);
        assert_eq!(joint_cdf_series(&m, &[1.0, 0.0, 1.0], &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn refuses_large_and_singular() {
        let cfg = SeriesConfig::default();
        let m = CorrelationModel::new(5, 4.0, 1.0).unwrap();
        assert!(matches!(
            joint_cdf_series(&m, &[1.0; 5], &cfg),
            Err(FasError::SeriesCap { n_ports: 5, max_ports: 4 })
        ));
        let m = CorrelationModel::new(4, 1e-4, 1.0).unwrap();
        assert!(matches!(joint_cdf_series(&m, &[1.0; 4], &cfg), Err(FasError::NearSingular { .. })));
        let m = CorrelationModel::new(2, 0.5, 1.0).unwrap();
        let deep = SeriesConfig { s0: MAX_S0 + 1, max_ports: 4 };
        assert!(joint_cdf_series(&m, &[1.0; 2], &deep).is_err());
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        let cfg = SeriesConfig::default();
        let m = CorrelationModel::new(2, 0.5, 1.0).unwrap();
        let (a, b, h) = (0.5, 0.5, 1e-4);
        let c = |x: f64, y: f64| joint_cdf_series(&m, &[x, y], &cfg).unwrap().raw;
        let mixed = (c(a + h, b + h) - c(a + h, b - h) - c(a - h, b + h) + c(a - h, b - h)) / (4.0 * h * h);
        let pdf = joint_pdf_series(&m, &[a, b], &cfg).unwrap();
        assert!((pdf - mixed).abs() < 1e-4, "{pdf} vs {mixed}");
    }

    #[test]
    fn convergence_gate() {
        let m = CorrelationModel::new(2, 0.5, 1.0).unwrap();
        let a = SeriesConfig { s0: 20, max_ports: 4 };
        let b = SeriesConfig { s0: 25, max_ports: 4 };
        for i in 1..=20 {
            let omega = 0.1 * i as f64;
            let q = OutageQuery::from_omega(10.0, omega).unwrap();
            let x = outage_theorem1(&m, &q, &a).unwrap().probability;
            let y = outage_theorem1(&m, &q, &b).unwrap().probability;
            assert!((x - y).abs() < 1e-6, "omega={omega}: {x} vs {y}");
        }
    }

    #[test]
    fn outage_monotone_in_omega() {
        let m = CorrelationModel::new(2, 0.5, 1.0).unwrap();
        let cfg = SeriesConfig::default();
        let mut last = 0.0;
        for i in 1..=100 {
            let q = OutageQuery::from_omega(10.0, 0.03 * i as f64).unwrap();
            let p = outage_theorem1(&m, &q, &cfg).unwrap().probability;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn high_snr_slope() {
        let cfg = SeriesConfig::default();
        for n in 1..=3 {
            let m = CorrelationModel::new(n, 1.0, 1.0).unwrap();
            let at = |db: f64| outage_theorem1(&m, &OutageQuery::from_db(10.0, db).unwrap(), &cfg).unwrap().probability;
            let slope = (at(50.0).log10() - at(40.0).log10()) / 1.0;
            assert!((slope + n as f64).abs() < 0.3, "N={n}: slope {slope}");
        }
    }
}
