//! Monte Carlo outage estimation for FAS and the SISO / SC / MRC baselines.
//!
//! Trials are processed in fixed-size batches spread over the rayon pool.
//! Each trial's channel depends only on `(seed, trial)`, and batches only
//! produce integer counts, so every estimate is bit-identical whatever the
//! thread count or scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Method, OutageEstimate, OutageQuery};
use crate::channel::{ChannelSampler, ModelTag};
use crate::correlation::CorrelationModel;
use crate::{Complex, FasError, Result};

pub const DEFAULT_BATCH: usize = 1 << 16;
/// Estimates below this probability want at least [`DEEP_TAIL_TRIALS`].
pub const DEEP_TAIL: f64 = 1e-4;
pub const DEEP_TAIL_TRIALS: u64 = 10_000_000;
/// Fewer outage events than this make a slope fit meaningless.
pub const MIN_EVENTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// Best of `n_ports` ports spread over `width` wavelengths.
    Fas { n_ports: usize, width: f64 },
    Siso,
    /// Best of `n_antennas` correlated antennas at half-wavelength spacing.
    Sc { n_antennas: usize },
    /// Maximal-ratio combining of `n_antennas` correlated antennas at
    /// half-wavelength spacing.
    Mrc { n_antennas: usize },
}

/// Half-wavelength-spaced antennas that fit in `width` wavelengths:
/// `floor(W / 0.5) + 1`.
pub fn antennas_in_width(width: f64) -> usize {
    (width / 0.5).floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combining {
    /// Strongest branch, statistic `max |h_n|^2`.
    Selection,
    /// All branches coherently, statistic `sum |h_n|^2`.
    MaxRatio,
}

impl Combining {
    fn statistic(self, h: &[Complex]) -> f64 {
        match self {
            Combining::Selection => h.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max),
            Combining::MaxRatio => h.iter().map(|c| c.norm_sqr()).sum(),
        }
    }
}

impl Scheme {
    pub fn model(&self, sigma2: f64) -> Result<CorrelationModel> {
        match *self {
            Scheme::Fas { n_ports, width } => CorrelationModel::new(n_ports, width, sigma2),
            Scheme::Siso => CorrelationModel::new(1, 0.5, sigma2),
            Scheme::Sc { n_antennas } | Scheme::Mrc { n_antennas } => {
                CorrelationModel::with_spacing(n_antennas, 0.5, sigma2)
            }
        }
    }

    pub fn combining(&self) -> Combining {
        match self {
            Scheme::Mrc { .. } => Combining::MaxRatio,
            _ => Combining::Selection,
        }
    }

    /// Compact name, safe inside a CSV field: `fas:3@0.5`, `sc:2`, `mrc:2`, `siso`.
    pub fn label(&self) -> String {
        match *self {
            Scheme::Fas { n_ports, width } => format!("fas:{n_ports}@{width}"),
            Scheme::Siso => "siso".to_string(),
            Scheme::Sc { n_antennas } => format!("sc:{n_antennas}"),
            Scheme::Mrc { n_antennas } => format!("mrc:{n_antennas}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub sigma2: f64,
    pub batch_size: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { trials: 1_000_000, seed: 0, sigma2: 1.0, batch_size: DEFAULT_BATCH }
    }
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        McConfig { trials, seed, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 1000 {
            return Err(FasError::domain(format!("at least 1000 trials required, got {}", self.trials)));
        }
        if self.batch_size == 0 {
            return Err(FasError::domain("batch size must be positive"));
        }
        Ok(())
    }

    fn batches(&self) -> u64 {
        self.trials.div_ceil(self.batch_size as u64)
    }

    fn batch_range(&self, b: u64) -> std::ops::Range<u64> {
        let start = b * self.batch_size as u64;
        start..(start + self.batch_size as u64).min(self.trials)
    }
}

fn binomial_estimate(events: u64, trials: u64, seed: u64) -> OutageEstimate {
    let p = events as f64 / trials as f64;
    OutageEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        method: Method::MonteCarlo,
        seed: Some(seed),
    }
}

fn warn_deep_tail(label: &str, est: &OutageEstimate) {
    if est.probability < DEEP_TAIL && est.trials < DEEP_TAIL_TRIALS {
        log::warn!(
            "{label}: outage {:.3e} from {} trials is in the deep tail; use at least {} trials",
            est.probability,
            est.trials,
            DEEP_TAIL_TRIALS
        );
    }
}

/// For each of the ascending `thresholds`, the number of trials whose
/// combining statistic falls strictly below it.
pub fn count_below(
    sampler: &ChannelSampler,
    combining: Combining,
    thresholds: &[f64],
    cfg: &McConfig,
) -> Result<Vec<u64>> {
    cfg.validate()?;
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(FasError::domain("thresholds must be ascending"));
    }
    let k = thresholds.len();
    let n = sampler.n_ports();
    // hist[j] counts trials whose statistic lies in [t_{j-1}, t_j)
    let hist = (0..cfg.batches())
        .into_par_iter()
        .map(|b| {
            let mut hist = vec![0u64; k + 1];
            let mut h = vec![Complex::new(0.0, 0.0); n];
            let mut scratch = Vec::with_capacity(sampler.modes());
            for trial in cfg.batch_range(b) {
                sampler.fill_trial(trial, &mut h, &mut scratch);
                let stat = combining.statistic(&h);
                hist[thresholds.partition_point(|&t| t <= stat)] += 1;
            }
            hist
        })
        .reduce(|| vec![0u64; k + 1], add_counts);
    let mut below = Vec::with_capacity(k);
    let mut running = 0;
    for count in &hist[..k] {
        running += count;
        below.push(running);
    }
    Ok(below)
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Outage of an explicit correlation model under the given combining.
pub fn mc_outage_with(
    model: &CorrelationModel,
    combining: Combining,
    query: &OutageQuery,
    cfg: &McConfig,
) -> Result<OutageEstimate> {
    let sampler = ChannelSampler::new(model, ModelTag::Exact, cfg.seed)?;
    let events = count_below(&sampler, combining, &[query.omega_sq()], cfg)?[0];
    Ok(binomial_estimate(events, cfg.trials, cfg.seed))
}

pub fn mc_outage(scheme: &Scheme, query: &OutageQuery, cfg: &McConfig) -> Result<OutageEstimate> {
    let est = mc_outage_with(&scheme.model(cfg.sigma2)?, scheme.combining(), query, cfg)?;
    warn_deep_tail(&scheme.label(), &est);
    Ok(est)
}

/// Outage over an ascending SNR grid from a single set of channel draws,
/// so the curve is exactly non-increasing.
pub fn mc_outage_curve(
    scheme: &Scheme,
    rate_q: f64,
    snr_grid_db: &[f64],
    cfg: &McConfig,
) -> Result<Vec<(f64, OutageEstimate)>> {
    let model = scheme.model(cfg.sigma2)?;
    mc_curve_with(&model, scheme.combining(), &scheme.label(), rate_q, snr_grid_db, cfg)
}

fn mc_curve_with(
    model: &CorrelationModel,
    combining: Combining,
    label: &str,
    rate_q: f64,
    snr_grid_db: &[f64],
    cfg: &McConfig,
) -> Result<Vec<(f64, OutageEstimate)>> {
    if snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FasError::domain("SNR grid must be strictly ascending"));
    }
    let queries = snr_grid_db
        .iter()
        .map(|&db| OutageQuery::from_db(rate_q, db))
        .collect::<Result<Vec<_>>>()?;
    // ascending SNR means descending threshold
    let thresholds: Vec<f64> = queries.iter().rev().map(|q| q.omega_sq()).collect();
    let sampler = ChannelSampler::new(model, ModelTag::Exact, cfg.seed)?;
    let counts = count_below(&sampler, combining, &thresholds, cfg)?;
    Ok(snr_grid_db
        .iter()
        .zip(counts.iter().rev())
        .map(|(&db, &events)| {
            let est = binomial_estimate(events, cfg.trials, cfg.seed);
            warn_deep_tail(label, &est);
            (db, est)
        })
        .collect())
}

/// Negated least-squares slope of `log10(outage)` against `log10(SNR)` over
/// the window. Refuses when any point has fewer than [`MIN_EVENTS`] events.
pub fn empirical_diversity(scheme: &Scheme, rate_q: f64, snr_window_db: &[f64], cfg: &McConfig) -> Result<f64> {
    if snr_window_db.len() < 2 {
        return Err(FasError::domain("a slope needs at least two SNR points"));
    }
    let curve = mc_outage_curve(scheme, rate_q, snr_window_db, cfg)?;
    let mut xs = Vec::with_capacity(curve.len());
    let mut ys = Vec::with_capacity(curve.len());
    for (db, est) in &curve {
        let events = (est.probability * est.trials as f64).round() as u64;
        if events < MIN_EVENTS {
            return Err(FasError::InsufficientEvents { snr_db: *db, events, required: MIN_EVENTS });
        }
        xs.push(db / 10.0);
        ys.push(est.probability.log10());
    }
    Ok(-least_squares_slope(&xs, &ys))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Pairwise difference of two CRN estimates, `p_a - p_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub a: usize,
    pub b: usize,
    pub difference: f64,
    pub std_error: f64,
}

impl PairedDifference {
    /// `|difference|` in units of its standard error (infinite when the
    /// difference is nonzero with zero error).
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            self.difference.abs() / self.std_error
        } else if self.difference == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub schemes: Vec<Scheme>,
    pub estimates: Vec<OutageEstimate>,
    /// One entry per unordered pair `a < b`.
    pub differences: Vec<PairedDifference>,
}

impl SchemeComparison {
    pub fn difference(&self, a: usize, b: usize) -> Option<PairedDifference> {
        self.differences.iter().find_map(|d| {
            if d.a == a && d.b == b {
                Some(*d)
            } else if d.a == b && d.b == a {
                Some(PairedDifference { a, b, difference: -d.difference, std_error: d.std_error })
            } else {
                None
            }
        })
    }
}

/// Runs every scheme on the same trial indices and seed, so the underlying
/// Gaussian draws are shared, and reports paired difference errors
/// `var(I_a - I_b) = p_a + p_b - 2 p_ab - (p_a - p_b)^2` per trial.
pub fn compare_schemes(schemes: &[Scheme], query: &OutageQuery, cfg: &McConfig) -> Result<SchemeComparison> {
    let models = schemes.iter().map(|s| s.model(cfg.sigma2)).collect::<Result<Vec<_>>>()?;
    compare_models(schemes, &models, query, cfg)
}

/// [`compare_schemes`] with the correlation models supplied directly.
pub fn compare_models(
    schemes: &[Scheme],
    models: &[CorrelationModel],
    query: &OutageQuery,
    cfg: &McConfig,
) -> Result<SchemeComparison> {
    if schemes.len() < 2 || schemes.len() != models.len() {
        return Err(FasError::domain("comparison needs at least two schemes, each with a model"));
    }
    cfg.validate()?;
    let samplers = models
        .iter()
        .map(|m| ChannelSampler::new(m, ModelTag::Exact, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let combining: Vec<Combining> = schemes.iter().map(Scheme::combining).collect();
    let k = schemes.len();
    let threshold = query.omega_sq();
    // joint[a * k + b] counts trials in outage under both a and b
    let joint = (0..cfg.batches())
        .into_par_iter()
        .map(|batch| {
            let mut joint = vec![0u64; k * k];
            let mut bufs: Vec<Vec<Complex>> = samplers.iter().map(|s| vec![Complex::new(0.0, 0.0); s.n_ports()]).collect();
            let mut scratch = Vec::new();
            let mut hit = vec![false; k];
            for trial in cfg.batch_range(batch) {
                for i in 0..k {
                    samplers[i].fill_trial(trial, &mut bufs[i], &mut scratch);
                    hit[i] = combining[i].statistic(&bufs[i]) < threshold;
                }
                for a in 0..k {
                    if hit[a] {
                        for b in a..k {
                            joint[a * k + b] += hit[b] as u64;
                        }
                    }
                }
            }
            joint
        })
        .reduce(|| vec![0u64; k * k], add_counts);

    let n = cfg.trials as f64;
    let estimates: Vec<OutageEstimate> = (0..k)
        .map(|a| {
            let est = binomial_estimate(joint[a * k + a], cfg.trials, cfg.seed);
            warn_deep_tail(&schemes[a].label(), &est);
            est
        })
        .collect();
    let mut differences = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let pa = estimates[a].probability;
            let pb = estimates[b].probability;
            let pab = joint[a * k + b] as f64 / n;
            let var = (pa + pb - 2.0 * pab - (pa - pb).powi(2)).max(0.0);
            differences.push(PairedDifference { a, b, difference: pa - pb, std_error: (var / n).sqrt() });
        }
    }
    Ok(SchemeComparison { schemes: schemes.to_vec(), estimates, differences })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q30() -> OutageQuery {
        OutageQuery::from_db(10.0, 30.0).unwrap()
    }

    #[test]
    fn siso_matches_rayleigh() {
        let cfg = McConfig::new(200_000, 1);
        let est = mc_outage(&Scheme::Siso, &q30(), &cfg).unwrap();
        let exact = 1.0 - (-1.023f64).exp();
        assert!((est.probability - exact).abs() < 3.0 * est.std_error);
        let p = est.probability;
        assert_eq!(est.std_error, (p * (1.0 - p) / 200_000.0).sqrt());
    }

    #[test]
    fn single_port_fas_is_siso() {
        let cfg = McConfig::new(20_000, 8);
        let a = mc_outage(&Scheme::Siso, &q30(), &cfg).unwrap();
        let b = mc_outage(&Scheme::Fas { n_ports: 1, width: 3.0 }, &q30(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sc_equals_fas_at_matching_width() {
        let cfg = McConfig::new(20_000, 4);
        for n in 2..=6 {
            let sc = mc_outage(&Scheme::Sc { n_antennas: n }, &q30(), &cfg).unwrap();
            let fas = mc_outage(&Scheme::Fas { n_ports: n, width: (n - 1) as f64 / 2.0 }, &q30(), &cfg).unwrap();
            assert_eq!(sc, fas);
        }
    }

    #[test]
    fn partitioning_does_not_change_results() {
        let scheme = Scheme::Fas { n_ports: 6, width: 1.0 };
        let a = mc_outage(&scheme, &q30(), &McConfig { batch_size: 1000, ..McConfig::new(10_007, 3) }).unwrap();
        let b = mc_outage(&scheme, &q30(), &McConfig { batch_size: 4096, ..McConfig::new(10_007, 3) }).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| mc_outage(&scheme, &q30(), &McConfig { batch_size: 77, ..McConfig::new(10_007, 3) })).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn curve_is_monotone_and_matches_points() {
        let scheme = Scheme::Fas { n_ports: 4, width: 1.0 };
        let cfg = McConfig::new(30_000, 2);
        let grid = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0];
        let curve = mc_outage_curve(&scheme, 10.0, &grid, &cfg).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1.probability <= w[0].1.probability));
        let single = mc_outage(&scheme, &OutageQuery::from_db(10.0, 25.0).unwrap(), &cfg).unwrap();
        assert_eq!(curve[3].1, single);
        assert!(mc_outage_curve(&scheme, 10.0, &[30.0, 20.0], &cfg).is_err());
    }

    #[test]
    fn independent_mrc_is_gamma() {
        let cfg = McConfig::new(200_000, 5);
        let model = CorrelationModel::independent(2, 1.0).unwrap();
        let q = q30();
        let est = mc_outage_with(&model, Combining::MaxRatio, &q, &cfg).unwrap();
        let x = q.omega_sq();
        let exact = 1.0 - (-x).exp() * (1.0 + x);
        assert!((est.probability - exact).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn duplicated_scheme_has_zero_difference() {
        let s = Scheme::Sc { n_antennas: 2 };
        let cmp = compare_schemes(&[s, s], &q30(), &McConfig::new(10_000, 0)).unwrap();
        let d = cmp.difference(0, 1).unwrap();
        assert_eq!(d.difference, 0.0);
        assert_eq!(d.std_error, 0.0);
        assert_eq!(d.z_score(), 0.0);
    }

    #[test]
    fn comparison_agrees_with_single_runs() {
        let schemes = [Scheme::Siso, Scheme::Sc { n_antennas: 2 }, Scheme::Mrc { n_antennas: 2 }];
        let cfg = McConfig::new(20_000, 6);
        let cmp = compare_schemes(&schemes, &q30(), &cfg).unwrap();
        for (s, est) in schemes.iter().zip(&cmp.estimates) {
            assert_eq!(*est, mc_outage(s, &q30(), &cfg).unwrap());
        }
        // MRC never does worse than SC on the same draws
        let d = cmp.difference(2, 1).unwrap();
        assert!(d.difference <= 0.0);
        assert_eq!(cmp.difference(1, 2).unwrap().difference, -d.difference);
    }

    #[test]
    fn diversity_of_siso() {
        let cfg = McConfig::new(400_000, 7);
        let d = empirical_diversity(&Scheme::Siso, 10.0, &[30.0, 35.0, 40.0], &cfg).unwrap();
        assert!((d - 1.0).abs() < 0.2, "{d}");
    }

    #[test]
    fn diversity_refuses_sparse_tail() {
        let cfg = McConfig::new(10_000, 7);
        let err = empirical_diversity(&Scheme::Fas { n_ports: 3, width: 1.0 }, 10.0, &[40.0, 50.0], &cfg).unwrap_err();
        assert!(matches!(err, FasError::InsufficientEvents { .. }));
    }

    #[test]
    fn rejects_tiny_runs() {
        assert!(mc_outage(&Scheme::Siso, &q30(), &McConfig::new(999, 0)).is_err());
    }

    #[test]
    fn mrc_width_rule() {
        assert_eq!(antennas_in_width(0.5), 2);
        assert_eq!(antennas_in_width(1.0), 3);
        assert_eq!(antennas_in_width(0.4), 1);
        assert_eq!(antennas_in_width(4.0), 9);
    }
}
