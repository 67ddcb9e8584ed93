use std::fmt::Write as _;

use fas_core::analytic::{
    algorithm1_nstar, flop_estimate, joint_cdf_series, joint_pdf_series, outage_eq15, outage_high_snr,
    outage_theorem1, OutageEstimate, OutageQuery, SeriesConfig,
};
use fas_core::channel::{ChannelSampler, ModelTag};
use fas_core::correlation::{default_rank_tol, CorrelationModel};
use fas_core::quad::QuadConfig;
use fas_core::simulate::{antennas_in_width, compare_schemes, mc_outage_curve, McConfig, Scheme};
use fas_core::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::{CdfMode, Command, Failure, MethodArg, SchemeArg};

const DEFAULT_N: usize = 50;
const DEFAULT_W: f64 = 0.5;
const DEFAULT_SIGMA2: f64 = 1.0;
const DEFAULT_Q: f64 = 10.0;
const DEFAULT_SNR_DB: f64 = 30.0;
const DEFAULT_EPS_TOL: f64 = 0.01;
const DEFAULT_TRIALS: u64 = 1_000_000;
const DEFAULT_SEED: u64 = 0;
const TABLE_WIDTHS: [f64; 5] = [0.5, 1.0, 2.0, 3.0, 4.0];

type Outcome = Result<String, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Flag, then config file, then default.
fn pick<T: Clone>(flag: &Option<T>, file: Option<T>, default: T) -> T {
    flag.clone().or(file).unwrap_or(default)
}

fn single(values: Option<Vec<f64>>, what: &str) -> Result<Option<f64>, Failure> {
    match values.as_deref() {
        None => Ok(None),
        Some([x]) => Ok(Some(*x)),
        Some(_) => Err(usage(format!("{what} takes a single value for this command"))),
    }
}

fn parse_enum<T: clap::ValueEnum>(raw: Option<&str>, what: &str) -> Result<Option<T>, Failure> {
    raw.map(|s| T::from_str(s, true).map_err(|_| usage(format!("unknown {what} {s:?} in config"))))
        .transpose()
}

fn positive(value: f64, what: &str) -> Result<f64, Failure> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(usage(format!("{what} must be positive, got {value}")))
    }
}

fn ascending(grid: &[f64]) -> Result<(), Failure> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("the SNR grid must be non-empty and strictly ascending"));
    }
    Ok(())
}

/// Floats are written with `{:?}`: shortest round-trip digits, switching to
/// exponent notation for very small or large magnitudes.
fn csv_header(args: &str, seed: Option<u64>, columns: &str) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# fas-lab {} seed={seed} args={args}\n{columns}\n", env!("CARGO_PKG_VERSION"))
}

pub fn run(command: &Command, cfg: &ExperimentConfig, args: &str) -> Outcome {
    match command {
        Command::Corr { n, w, sigma2, rank_tol } => corr(
            pick(n, cfg.n, DEFAULT_N),
            pick(w, single(cfg.widths(), "w")?, DEFAULT_W),
            pick(sigma2, cfg.sigma2, DEFAULT_SIGMA2),
            rank_tol.or(cfg.rank_tol),
        ),
        Command::Nstar { n, w, sigma2, eps_tol } => nstar(
            pick(n, cfg.n, DEFAULT_N),
            &pick(w, cfg.widths(), TABLE_WIDTHS.to_vec()),
            pick(sigma2, cfg.sigma2, DEFAULT_SIGMA2),
            pick(eps_tol, cfg.eps_tol, DEFAULT_EPS_TOL),
            args,
        ),
        Command::Outage { method, scheme, n, w, sigma2, q, snr, trials, seed, s0, eps_rank, eps_tol } => {
            let width = pick(w, single(cfg.widths(), "w")?, DEFAULT_W);
            let scheme = pick(scheme, parse_enum(cfg.scheme.as_deref(), "scheme")?, SchemeArg::Fas);
            let default_n = match scheme {
                SchemeArg::Sc | SchemeArg::Mrc => antennas_in_width(width),
                _ => DEFAULT_N,
            };
            let opts = OutageOpts {
                method: pick(method, parse_enum(cfg.method.as_deref(), "method")?, MethodArg::Mc),
                scheme,
                n: pick(n, cfg.n, default_n),
                width,
                sigma2: pick(sigma2, cfg.sigma2, DEFAULT_SIGMA2),
                q: pick(q, cfg.q, DEFAULT_Q),
                snr_db: pick(snr, cfg.snrs(), vec![DEFAULT_SNR_DB]),
                trials: pick(trials, cfg.trials, DEFAULT_TRIALS),
                seed: pick(seed, cfg.seed, DEFAULT_SEED),
                s0: pick(s0, cfg.s0, SeriesConfig::default().s0),
                eps_rank: eps_rank.or(cfg.eps_rank),
                eps_tol: pick(eps_tol, cfg.eps_tol, DEFAULT_EPS_TOL),
            };
            outage(&opts, args)
        }
        Command::Cdf { mode, n, w, sigma2, points, rmax, s0, trials, seed, keep } => {
            let mode = pick(mode, parse_enum(cfg.mode.as_deref(), "mode")?, CdfMode::Surface);
            let width = pick(w, single(cfg.widths(), "w")?, DEFAULT_W);
            let sigma2 = pick(sigma2, cfg.sigma2, DEFAULT_SIGMA2);
            match mode {
                CdfMode::Surface => cdf_surface(
                    pick(n, cfg.n, 2),
                    width,
                    sigma2,
                    pick(points, cfg.points, 50),
                    pick(rmax, cfg.rmax, 2.5 * sigma2.sqrt()),
                    pick(s0, cfg.s0, SeriesConfig::default().s0),
                    args,
                ),
                CdfMode::Compare => cdf_compare(
                    pick(n, cfg.n, DEFAULT_N),
                    width,
                    sigma2,
                    pick(points, cfg.points, 200),
                    pick(rmax, cfg.rmax, 3.0 * sigma2.sqrt()),
                    pick(trials, cfg.trials, DEFAULT_TRIALS),
                    pick(seed, cfg.seed, DEFAULT_SEED),
                    keep.or(cfg.keep),
                    args,
                ),
            }
        }
        Command::Compare { w, sigma2, q, snr, trials, seed, eps_tol, schemes } => compare(
            pick(w, single(cfg.widths(), "w")?, DEFAULT_W),
            pick(sigma2, cfg.sigma2, DEFAULT_SIGMA2),
            pick(q, cfg.q, DEFAULT_Q),
            pick(snr, single(cfg.snrs(), "snr_db")?, DEFAULT_SNR_DB),
            pick(trials, cfg.trials, DEFAULT_TRIALS),
            pick(seed, cfg.seed, DEFAULT_SEED),
            pick(eps_tol, cfg.eps_tol, DEFAULT_EPS_TOL),
            &pick(schemes, cfg.schemes.clone(), ["mrc", "fas", "sc", "siso"].map(String::from).to_vec()),
            args,
        ),
    }
}

#[derive(Serialize)]
struct CorrOutput {
    correlation: fas_core::correlation::CorrelationReport,
    rank: fas_core::correlation::RankReport,
}

fn corr(n: usize, w: f64, sigma2: f64, rank_tol: Option<f64>) -> Outcome {
    let model = CorrelationModel::new(n, w, sigma2)?;
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(n));
    let out = CorrOutput { correlation: model.report(), rank: model.numerical_rank(tol)? };
    let mut text = serde_json::to_string_pretty(&out).map_err(|e| Failure::Numerical(e.into()))?;
    text.push('\n');
    Ok(text)
}

fn nstar(n: usize, widths: &[f64], sigma2: f64, eps_tol: f64, args: &str) -> Outcome {
    positive(eps_tol, "eps_tol")?;
    let mut out = csv_header(args, None, "w,n_star,numerical_rank,eps_tol,flops");
    for &w in widths {
        let model = CorrelationModel::new(n, w, sigma2)?;
        let n_star = algorithm1_nstar(&model, eps_tol)?;
        let flops = flop_estimate(n as u64, n_star as u64)?;
        writeln!(out, "{w:?},{n_star},{},{eps_tol:?},{flops}", model.default_numerical_rank()).unwrap();
    }
    Ok(out)
}

struct OutageOpts {
    method: MethodArg,
    scheme: SchemeArg,
    n: usize,
    width: f64,
    sigma2: f64,
    q: f64,
    snr_db: Vec<f64>,
    trials: u64,
    seed: u64,
    s0: usize,
    eps_rank: Option<usize>,
    eps_tol: f64,
}

fn build_scheme(kind: SchemeArg, n: usize, width: f64) -> Scheme {
    match kind {
        SchemeArg::Fas => Scheme::Fas { n_ports: n, width },
        SchemeArg::Siso => Scheme::Siso,
        SchemeArg::Sc => Scheme::Sc { n_antennas: n },
        SchemeArg::Mrc => Scheme::Mrc { n_antennas: n },
    }
}

fn outage_row(out: &mut String, scheme: &Scheme, db: f64, est: &OutageEstimate) {
    let seed = est.seed.map_or_else(String::new, |s| s.to_string());
    writeln!(
        out,
        "{},{},{db:?},{:?},{:?},{},{seed}",
        scheme.label(),
        est.method.name(),
        est.probability,
        est.std_error,
        est.trials
    )
    .unwrap();
}

fn outage(o: &OutageOpts, args: &str) -> Outcome {
    ascending(&o.snr_db)?;
    positive(o.q, "q")?;
    let scheme = build_scheme(o.scheme, o.n, o.width);
    let header = "scheme,method,snr_db,outage,std_error,trials,seed";
    if o.method == MethodArg::Mc {
        let mc = McConfig { trials: o.trials, seed: o.seed, sigma2: o.sigma2, ..McConfig::default() };
        let curve = mc_outage_curve(&scheme, o.q, &o.snr_db, &mc)?;
        let mut out = csv_header(args, Some(o.seed), header);
        for (db, est) in &curve {
            outage_row(&mut out, &scheme, *db, est);
        }
        return Ok(out);
    }
    if o.scheme == SchemeArg::Mrc {
        return Err(usage("analytic methods describe selection; use --method mc for mrc"));
    }
    let model = scheme.model(o.sigma2)?;
    let series = SeriesConfig { s0: o.s0, ..SeriesConfig::default() };
    if o.method == MethodArg::Theorem1 && model.n_ports() > series.max_ports {
        return Err(usage(format!(
            "theorem1 is capped at N <= {} because the series cost grows combinatorially in N(N-1)/2; \
             got N = {}. Use eq15, asymptote or mc",
            series.max_ports,
            model.n_ports()
        )));
    }
    let eps_rank = match (o.method, o.eps_rank) {
        (MethodArg::Eq15, Some(k)) => k,
        (MethodArg::Eq15, None) => algorithm1_nstar(&model, positive(o.eps_tol, "eps_tol")?)?,
        _ => 0,
    };
    let mut out = csv_header(args, None, header);
    for &db in &o.snr_db {
        let query = OutageQuery::from_db(o.q, db)?;
        let est = match o.method {
            MethodArg::Theorem1 => outage_theorem1(&model, &query, &series)?,
            MethodArg::Eq15 => outage_eq15(&model, &query, eps_rank, &QuadConfig::default())?,
            MethodArg::Asymptote => OutageEstimate {
                probability: outage_high_snr(&model, &query)?,
                std_error: 0.0,
                trials: 0,
                method: fas_core::analytic::Method::Asymptote,
                seed: None,
            },
            MethodArg::Mc => unreachable!(),
        };
        outage_row(&mut out, &scheme, db, &est);
    }
    Ok(out)
}

fn cdf_surface(n: usize, w: f64, sigma2: f64, points: usize, rmax: f64, s0: usize, args: &str) -> Outcome {
    if n != 2 {
        return Err(usage(format!("surface mode draws the two-port joint distribution; got n = {n}")));
    }
    if points == 0 {
        return Err(usage("points must be positive"));
    }
    positive(rmax, "rmax")?;
    let model = CorrelationModel::new(2, w, sigma2)?;
    let cfg = SeriesConfig { s0, ..SeriesConfig::default() };
    let mut out = csv_header(args, None, "r1,r2,pdf,cdf,cdf_raw");
    let grid: Vec<f64> = (1..=points).map(|i| rmax * i as f64 / points as f64).collect();
    for &r1 in &grid {
        for &r2 in &grid {
            let pdf = joint_pdf_series(&model, &[r1, r2], &cfg)?;
            let cdf = joint_cdf_series(&model, &[r1, r2], &cfg)?;
            writeln!(out, "{r1:?},{r2:?},{pdf:?},{:?},{:?}", cdf.value, cdf.raw).unwrap();
        }
    }
    Ok(out)
}

fn max_envelopes(model: &CorrelationModel, tag: ModelTag, trials: u64, seed: u64) -> Result<Vec<f64>, Failure> {
    let sampler = ChannelSampler::new(model, tag, seed)?;
    let n = model.n_ports();
    let mut env: Vec<f64> = (0..trials)
        .into_par_iter()
        .map_init(
            || (vec![Complex::new(0.0, 0.0); n], Vec::new()),
            |(h, scratch), t| {
                sampler.fill_trial(t, h, scratch);
                h.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt()
            },
        )
        .collect();
    env.sort_by(f64::total_cmp);
    Ok(env)
}

/// Largest gap between two sorted samples' empirical CDFs.
fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[allow(clippy::too_many_arguments)]
fn cdf_compare(
    n: usize,
    w: f64,
    sigma2: f64,
    points: usize,
    rmax: f64,
    trials: u64,
    seed: u64,
    keep: Option<usize>,
    args: &str,
) -> Outcome {
    if points == 0 || trials == 0 {
        return Err(usage("points and trials must be positive"));
    }
    positive(rmax, "rmax")?;
    let model = CorrelationModel::new(n, w, sigma2)?;
    let keep = keep.unwrap_or_else(|| model.default_numerical_rank());
    let exact = max_envelopes(&model, ModelTag::Exact, trials, seed)?;
    let low = max_envelopes(&model, ModelTag::Truncated(keep), trials, seed)?;
    eprintln!("max CDF gap, exact vs rank-{keep} model: {}", ks_sorted(&exact, &low));
    let mut out = csv_header(args, Some(seed), "envelope,cdf_exact,cdf_truncated,gap");
    let count = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    for i in 0..=points {
        let x = rmax * i as f64 / points as f64;
        let (a, b) = (count(&exact, x), count(&low, x));
        writeln!(out, "{x:?},{a:?},{b:?},{:?}", (a - b).abs()).unwrap();
    }
    Ok(out)
}

fn parse_scheme(spec: &str, width: f64, n_star: usize) -> Result<Scheme, Failure> {
    let (name, count) = match spec.split_once(':') {
        Some((name, c)) => {
            let c: usize = c.trim().parse().map_err(|_| usage(format!("bad count in scheme {spec:?}")))?;
            (name.trim(), Some(c))
        }
        None => (spec.trim(), None),
    };
    let antennas = antennas_in_width(width);
    match name.to_ascii_lowercase().as_str() {
        "siso" => Ok(Scheme::Siso),
        "fas" => Ok(Scheme::Fas { n_ports: count.unwrap_or(n_star), width }),
        "sc" => Ok(Scheme::Sc { n_antennas: count.unwrap_or(antennas) }),
        "mrc" => Ok(Scheme::Mrc { n_antennas: count.unwrap_or(antennas) }),
        _ => Err(usage(format!("unknown scheme {spec:?}; expected siso, fas, sc or mrc"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn compare(
    w: f64,
    sigma2: f64,
    q: f64,
    snr_db: f64,
    trials: u64,
    seed: u64,
    eps_tol: f64,
    specs: &[String],
    args: &str,
) -> Outcome {
    if specs.len() < 2 {
        return Err(usage("compare needs at least two schemes"));
    }
    positive(eps_tol, "eps_tol")?;
    // N* from a dense reference aperture of the same width
    let n_star = algorithm1_nstar(&CorrelationModel::new(DEFAULT_N, w, sigma2)?, eps_tol)?;
    let schemes = specs.iter().map(|s| parse_scheme(s, w, n_star)).collect::<Result<Vec<_>, _>>()?;
    let query = OutageQuery::from_db(q, snr_db)?;
    let mc = McConfig { trials, seed, sigma2, ..McConfig::default() };
    let cmp = compare_schemes(&schemes, &query, &mc)?;
    let mut out = csv_header(args, Some(seed), "kind,scheme_a,scheme_b,snr_db,value,std_error,trials,seed");
    for (s, est) in schemes.iter().zip(&cmp.estimates) {
        writeln!(out, "estimate,{},,{snr_db:?},{:?},{:?},{trials},{seed}", s.label(), est.probability, est.std_error)
            .unwrap();
    }
    for d in &cmp.differences {
        writeln!(
            out,
            "difference,{},{},{snr_db:?},{:?},{:?},{trials},{seed}",
            schemes[d.a].label(),
            schemes[d.b].label(),
            d.difference,
            d.std_error
        )
        .unwrap();
    }
    Ok(out)
}
