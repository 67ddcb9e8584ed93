//! Correlated Rayleigh channel draws for the ports of a [`CorrelationModel`].
//!
//! Every trial owns an independent ChaCha8 stream keyed by `(seed, domain)`
//! and selected by the trial index, so a trial's coefficients depend only on
//! `(seed, trial)`. Batches can be split, reordered or run in parallel
//! without changing any value, and two schemes sampled with the same seed
//! see the same underlying fading (common random numbers).

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationModel;
use crate::{Complex, FasError, Result};

const DOMAIN_MODES: u64 = 0;
const DOMAIN_RESIDUAL: u64 = 1;

/// Ψ² more negative than this signals a broken eigendecomposition.
const PSI_NEGATIVE_TOL: f64 = 1e-12;

const DUMP_MAGIC: &[u8; 4] = b"FASH";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rank", rename_all = "snake_case")]
pub enum ModelTag {
    /// All modes with a positive eigenvalue.
    Exact,
    /// Leading modes plus an independent per-port residual that restores
    /// each port's marginal variance.
    EpsRank(usize),
    /// Leading modes only.
    Truncated(usize),
}

impl ModelTag {
    fn code(self) -> (u8, u32) {
        match self {
            ModelTag::Exact => (0, 0),
            ModelTag::EpsRank(k) => (1, k as u32),
            ModelTag::Truncated(k) => (2, k as u32),
        }
    }

    fn from_code(code: u8, param: u32) -> Result<Self> {
        match code {
            0 => Ok(ModelTag::Exact),
            1 => Ok(ModelTag::EpsRank(param as usize)),
            2 => Ok(ModelTag::Truncated(param as usize)),
            _ => Err(FasError::domain(format!("unknown model tag {code}"))),
        }
    }
}

/// Coefficients of `trials` consecutive trials, trial-major:
/// `coefficients[t * n_ports + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBatch {
    pub n_ports: usize,
    pub trials: usize,
    pub first_trial: u64,
    pub coefficients: Vec<Complex>,
    pub model_tag: ModelTag,
    pub seed: u64,
}

impl ChannelBatch {
    pub fn trial(&self, t: usize) -> &[Complex] {
        &self.coefficients[t * self.n_ports..(t + 1) * self.n_ports]
    }

    /// Little-endian dump: magic, version, N, trials, first trial, seed,
    /// tag, tag parameter, then `(re, im)` pairs.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (code, param) = self.model_tag.code();
        let mut buf = Vec::with_capacity(45 + 16 * self.coefficients.len());
        buf.extend_from_slice(DUMP_MAGIC);
        buf.extend_from_slice(&DUMP_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n_ports as u32).to_le_bytes());
        buf.extend_from_slice(&(self.trials as u64).to_le_bytes());
        buf.extend_from_slice(&self.first_trial.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.push(code);
        buf.extend_from_slice(&param.to_le_bytes());
        for h in &self.coefficients {
            buf.extend_from_slice(&h.re.to_le_bytes());
            buf.extend_from_slice(&h.im.to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 41];
        r.read_exact(&mut head).map_err(io_err)?;
        if &head[0..4] != DUMP_MAGIC {
            return Err(FasError::domain("not a channel dump (bad magic)"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(head[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != DUMP_VERSION {
            return Err(FasError::domain(format!("unsupported dump version {version}")));
        }
        let n_ports = u32_at(8) as usize;
        let trials = u64_at(12) as usize;
        let first_trial = u64_at(20);
        let seed = u64_at(28);
        let model_tag = ModelTag::from_code(head[36], u32_at(37))?;
        let count = n_ports
            .checked_mul(trials)
            .ok_or_else(|| FasError::domain("dump dimensions overflow"))?;
        let mut body = vec![0u8; 16 * count];
        r.read_exact(&mut body).map_err(io_err)?;
        let coefficients = body
            .chunks_exact(16)
            .map(|c| {
                Complex::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Ok(ChannelBatch { n_ports, trials, first_trial, coefficients, model_tag, seed })
    }
}

fn io_err(e: std::io::Error) -> FasError {
    FasError::domain(format!("channel dump i/o: {e}"))
}

/// Precomputed mixing coefficients for one model and sampling mode.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    n_ports: usize,
    modes: usize,
    /// `mix[n * modes + m] = sqrt(lambda_m) * u_{n,m}`.
    mix: Vec<f64>,
    /// Per-port residual standard deviation (eps-rank mode only).
    psi: Option<Vec<f64>>,
    tag: ModelTag,
    seed: u64,
    modes_rng: ChaCha8Rng,
    residual_rng: ChaCha8Rng,
}

impl ChannelSampler {
    pub fn new(model: &CorrelationModel, tag: ModelTag, seed: u64) -> Result<Self> {
        let n = model.n_ports();
        let lambda = model.eigvals();
        let modes = match tag {
            ModelTag::Exact => lambda.iter().take_while(|&&l| l > 0.0).count(),
            ModelTag::EpsRank(k) | ModelTag::Truncated(k) => {
                if k == 0 || k > n {
                    return Err(FasError::domain(format!("rank must lie in 1..={n}, got {k}")));
                }
                k
            }
        };
        let u = model.eigvecs();
        let mut mix = Vec::with_capacity(n * modes);
        for row in 0..n {
            for m in 0..modes {
                mix.push(lambda[m].sqrt() * u[(row, m)]);
            }
        }
        let psi = match tag {
            ModelTag::EpsRank(_) => {
                let sigma2 = model.sigma2();
                let mut psi = Vec::with_capacity(n);
                for row in 0..n {
                    let captured: f64 = mix[row * modes..(row + 1) * modes].iter().map(|c| c * c).sum();
                    let rest = sigma2 - captured;
                    if rest < -PSI_NEGATIVE_TOL * sigma2 {
                        return Err(FasError::Internal(format!(
                            "port {row} captures {captured} > sigma2 = {sigma2}"
                        )));
                    }
                    psi.push(rest.max(0.0).sqrt());
                }
                Some(psi)
            }
            _ => None,
        };
        Ok(ChannelSampler {
            n_ports: n,
            modes,
            mix,
            psi,
            tag,
            seed,
            modes_rng: keyed_rng(seed, DOMAIN_MODES),
            residual_rng: keyed_rng(seed, DOMAIN_RESIDUAL),
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes the `N` coefficients of trial `trial` into `out`. `scratch`
    /// is resized as needed and may be reused across calls.
    pub fn fill_trial(&self, trial: u64, out: &mut [Complex], scratch: &mut Vec<Complex>) {
        debug_assert_eq!(out.len(), self.n_ports);
        let mut rng = self.modes_rng.clone();
        rng.set_stream(trial);
        scratch.clear();
        scratch.extend((0..self.modes).map(|_| standard_complex(&mut rng)));
        for (row, h) in out.iter_mut().enumerate() {
            let coeffs = &self.mix[row * self.modes..(row + 1) * self.modes];
            let mut acc = Complex::new(0.0, 0.0);
            for (c, z) in coeffs.iter().zip(scratch.iter()) {
                acc.re += c * z.re;
                acc.im += c * z.im;
            }
            *h = acc;
        }
        if let Some(psi) = &self.psi {
            let mut rng = self.residual_rng.clone();
            rng.set_stream(trial);
            for (h, &p) in out.iter_mut().zip(psi) {
                let v = standard_complex(&mut rng);
                h.re += p * v.re;
                h.im += p * v.im;
            }
        }
    }

    /// Trials `first_trial .. first_trial + trials`.
    pub fn sample(&self, first_trial: u64, trials: usize) -> ChannelBatch {
        let mut coefficients = vec![Complex::new(0.0, 0.0); trials * self.n_ports];
        let mut scratch = Vec::with_capacity(self.modes);
        for (t, out) in coefficients.chunks_exact_mut(self.n_ports.max(1)).enumerate() {
            self.fill_trial(first_trial + t as u64, out, &mut scratch);
        }
        ChannelBatch {
            n_ports: self.n_ports,
            trials,
            first_trial,
            coefficients,
            model_tag: self.tag,
            seed: self.seed,
        }
    }
}

fn keyed_rng(seed: u64, domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Open interval (0, 1) with 53 random bits.
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// CN(0, 1) via Box-Muller: both Gaussians of one pair, scaled by 1/sqrt(2).
fn standard_complex(rng: &mut ChaCha8Rng) -> Complex {
    let u1 = unit_open(rng);
    let u2 = unit_open(rng);
    let r = (-u1.ln()).sqrt(); // sqrt(-2 ln u1) / sqrt(2)
    let (s, c) = (2.0 * PI * u2).sin_cos();
    Complex::new(r * c, r * s)
}

pub fn sample_exact(model: &CorrelationModel, trials: usize, seed: u64) -> Result<ChannelBatch> {
    Ok(ChannelSampler::new(model, ModelTag::Exact, seed)?.sample(0, trials))
}

pub fn sample_eps_rank(model: &CorrelationModel, rank: usize, trials: usize, seed: u64) -> Result<ChannelBatch> {
    Ok(ChannelSampler::new(model, ModelTag::EpsRank(rank), seed)?.sample(0, trials))
}

pub fn sample_truncated(model: &CorrelationModel, keep: usize, trials: usize, seed: u64) -> Result<ChannelBatch> {
    Ok(ChannelSampler::new(model, ModelTag::Truncated(keep), seed)?.sample(0, trials))
}

/// Per-trial strongest envelope `max_n |h_n|`.
pub fn envelope_max(batch: &ChannelBatch) -> Vec<f64> {
    batch
        .coefficients
        .chunks_exact(batch.n_ports)
        .map(|h| h.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt())
        .collect()
}
