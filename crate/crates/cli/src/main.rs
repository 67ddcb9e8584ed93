mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fas_core::FasError;

use crate::config::ExperimentConfig;

/// Outage, diversity and port-count experiments for fluid antenna systems.
#[derive(Debug, Parser)]
#[command(name = "fas-lab", version)]
pub struct Cli {
    /// JSON file with parameter overrides (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlation matrix, spectrum and numerical rank as JSON.
    Corr {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Relative eigenvalue tolerance for the numerical rank (default N * eps).
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Suboptimal port count N* over a list of widths.
    Nstar {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        w: Option<Vec<f64>>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        eps_tol: Option<f64>,
    },
    /// Outage probability against SNR.
    Outage {
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        /// SNR values in dB, comma separated.
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        s0: Option<usize>,
        /// Leading modes kept by the eq15 method (default N*).
        #[arg(long)]
        eps_rank: Option<usize>,
        #[arg(long)]
        eps_tol: Option<f64>,
    },
    /// Joint PDF/CDF surface (N = 2) or exact-vs-truncated envelope CDFs.
    Cdf {
        #[arg(long, value_enum)]
        mode: Option<CdfMode>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Grid points per axis.
        #[arg(long)]
        points: Option<usize>,
        /// Largest envelope on the grid.
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        s0: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Modes kept by the truncated model (default: numerical rank).
        #[arg(long)]
        keep: Option<usize>,
    },
    /// Paired comparison of FAS against SISO, SC and MRC.
    Compare {
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        eps_tol: Option<f64>,
        /// Schemes as `siso`, `fas`, `sc`, `mrc`, optionally `name:count`.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mc,
    Theorem1,
    Eq15,
    Asymptote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Fas,
    Siso,
    Sc,
    Mrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CdfMode {
    Surface,
    Compare,
}

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit 2).
    Usage(String),
    /// The computation itself failed (exit 1).
    Numerical(anyhow::Error),
}

impl From<FasError> for Failure {
    fn from(e: FasError) -> Self {
        match e {
            FasError::Domain(_) | FasError::SeriesCap { .. } => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("FAS_LAB_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        Err(_) => log::warn!("ignoring FAS_LAB_THREADS={raw:?}: not a non-negative integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();

    let cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();

    let result = commands::run(&cli.command, &cfg, &argv.join(" ")).and_then(|text| {
        match &cli.output {
            Some(path) => std::fs::write(path, text.as_bytes())
                .map_err(|e| Failure::Numerical(anyhow::anyhow!("writing {}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Numerical(e.into())),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
