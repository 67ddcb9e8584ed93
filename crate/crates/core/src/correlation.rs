//! Jakes-model spatial correlation between equally spaced ports, with the
//! spectral quantities the analysis needs: sorted eigenpairs, determinant,
//! cofactor matrix, numerical rank and rank truncation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::specfun::bessel_j0;
use crate::{FasError, Result};

/// Negative eigenvalues down to `-NEGATIVE_CLIP * lambda_1` are rounding noise
/// and are clipped to zero.
pub const NEGATIVE_CLIP: f64 = 1e-12;
/// `det(J)` below this is treated as near-singular.
pub const SINGULAR_DET: f64 = 1e-280;
/// `lambda_1 / lambda_N` above this is treated as near-singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Default relative tolerance for the numerical rank of `J`: `N * eps`.
pub fn default_rank_tol(n_ports: usize) -> f64 {
    n_ports as f64 * f64::EPSILON
}

/// Immutable correlation structure of an `N`-port aperture.
#[derive(Debug, Clone)]
pub struct CorrelationModel {
    n_ports: usize,
    width: f64,
    sigma2: f64,
    matrix_j: DMatrix<f64>,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
    det_j: f64,
    condition: f64,
    cofactor_k: Option<DMatrix<f64>>,
}

impl CorrelationModel {
    /// `N` ports spread evenly over `width` wavelengths:
    /// `J[m][n] = sigma2 * J0(2 pi (m - n) W / (N - 1))`.
    ///
    /// A single port has no spacing and is defined as `J = [sigma2]`.
    pub fn new(n_ports: usize, width: f64, sigma2: f64) -> Result<Self> {
        if n_ports == 0 {
            return Err(FasError::domain("n_ports must be at least 1"));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(FasError::domain(format!("width must be positive and finite, got {width}")));
        }
        let spacing = if n_ports > 1 { width / (n_ports - 1) as f64 } else { 0.0 };
        Self::build(n_ports, spacing, width, sigma2)
    }

    /// `N` antennas at a fixed element spacing (in wavelengths), e.g. 0.5 for
    /// a half-wavelength array. Identical to [`CorrelationModel::new`] with
    /// `width = spacing * (N - 1)`.
    pub fn with_spacing(n_antennas: usize, spacing: f64, sigma2: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(FasError::domain("n_antennas must be at least 1"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(FasError::domain(format!("spacing must be positive, got {spacing}")));
        }
        let width = spacing * (n_antennas - 1) as f64;
        let spacing = if n_antennas > 1 { spacing } else { 0.0 };
        Self::build(n_antennas, spacing, width, sigma2)
    }

    /// Uncorrelated branches, `J = sigma2 * I` (reported with infinite width).
    pub fn independent(n: usize, sigma2: f64) -> Result<Self> {
        if n == 0 {
            return Err(FasError::domain("n must be at least 1"));
        }
        check_sigma2(sigma2)?;
        Self::from_matrix(DMatrix::from_diagonal_element(n, n, sigma2), f64::INFINITY, sigma2)
    }

    fn build(n: usize, spacing: f64, width: f64, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        // Toeplitz: one Bessel evaluation per lag
        let mut lags = Vec::with_capacity(n);
        for d in 0..n {
            lags.push(sigma2 * bessel_j0(2.0 * PI * d as f64 * spacing)?);
        }
        lags[0] = sigma2;
        let j = DMatrix::from_fn(n, n, |r, c| lags[r.abs_diff(c)]);
        Self::from_matrix(j, width, sigma2)
    }

    fn from_matrix(matrix_j: DMatrix<f64>, width: f64, sigma2: f64) -> Result<Self> {
        let n = matrix_j.nrows();
        let eig = SymmetricEigen::new(matrix_j.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let lambda_1 = eig.eigenvalues[order[0]];
        let mut eigvals = Vec::with_capacity(n);
        let mut eigvecs = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut lam = eig.eigenvalues[src];
            if lam < 0.0 {
                if -lam > NEGATIVE_CLIP * lambda_1 {
                    return Err(FasError::Internal(format!(
                        "eigenvalue {lam:e} is negative beyond rounding (lambda_1 = {lambda_1:e})"
                    )));
                }
                lam = 0.0;
            }
            eigvals.push(lam);
            let mut col = eig.eigenvectors.column(src).clone_owned();
            // sign convention: first clearly nonzero component positive
            let scale = col.amax();
            if let Some(first) = col.iter().find(|v| v.abs() > 1e-12 * scale) {
                if *first < 0.0 {
                    col.neg_mut();
                }
            }
            eigvecs.set_column(dst, &col);
        }

        // product of the clipped spectrum: consistent with every other
        // eigenvalue-based quantity, and exactly zero for a rank-deficient J
        let det_j: f64 = eigvals.iter().product();
        let lambda_n = eigvals[n - 1];
        let condition = if lambda_n > 0.0 { eigvals[0] / lambda_n } else { f64::INFINITY };
        let singular = !(det_j >= SINGULAR_DET) || condition > SINGULAR_CONDITION;
        let cofactor_k = if singular {
            None
        } else {
            matrix_j.clone().try_inverse().map(|inv| inv.transpose() * det_j)
        };

        Ok(CorrelationModel {
            n_ports: n,
            width,
            sigma2,
            matrix_j,
            eigvals,
            eigvecs,
            det_j,
            condition,
            cofactor_k,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix_j
    }

    /// Eigenvalues in descending order, rounding negatives clipped to zero.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// Orthonormal eigenvectors as columns, ordered like [`Self::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn det(&self) -> f64 {
        self.det_j
    }

    /// `lambda_1 / lambda_N`, infinite when the smallest eigenvalue is zero.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Cofactor matrix `K = det(J) J^{-T}`; `None` when `J` is near-singular.
    pub fn cofactor(&self) -> Option<&DMatrix<f64>> {
        self.cofactor_k.as_ref()
    }

    pub fn is_near_singular(&self) -> bool {
        self.cofactor_k.is_none()
    }

    pub fn trace(&self) -> f64 {
        self.matrix_j.trace()
    }

    /// `Ñ = #{n : lambda_n > rel_tol * lambda_1}`.
    pub fn numerical_rank(&self, rel_tol: f64) -> Result<RankReport> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(FasError::domain(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        let tolerance_used = rel_tol * self.eigvals[0];
        let numerical_rank = self.eigvals.iter().filter(|&&l| l > tolerance_used).count();
        Ok(RankReport {
            numerical_rank,
            rel_tol,
            tolerance_used,
            eigval_profile: self.eigvals.clone(),
            condition_estimate: self.condition,
        })
    }

    /// Numerical rank at [`default_rank_tol`].
    pub fn default_numerical_rank(&self) -> usize {
        let tol = default_rank_tol(self.n_ports).min(0.5);
        self.numerical_rank(tol).map(|r| r.numerical_rank).unwrap_or(self.n_ports)
    }

    /// Best rank-`keep` approximation in Frobenius norm: the spectrum with
    /// everything past `keep` zeroed.
    pub fn truncate_rank(&self, keep: usize) -> Result<TruncatedSpectrum> {
        if keep == 0 || keep > self.n_ports {
            return Err(FasError::domain(format!(
                "keep must lie in 1..={}, got {keep}",
                self.n_ports
            )));
        }
        let mut eigvals = self.eigvals.clone();
        for l in eigvals.iter_mut().skip(keep) {
            *l = 0.0;
        }
        let frobenius_error = self.eigvals[keep..].iter().map(|l| l * l).sum::<f64>().sqrt();
        Ok(TruncatedSpectrum { keep, eigvals, frobenius_error })
    }

    pub fn report(&self) -> CorrelationReport {
        CorrelationReport {
            n_ports: self.n_ports,
            width: self.width,
            sigma2: self.sigma2,
            matrix_j: rows(&self.matrix_j),
            eigvals: self.eigvals.clone(),
            eigvecs: rows(&self.eigvecs),
            det_j: self.det_j,
            cofactor_k: self.cofactor_k.as_ref().map(rows),
            near_singular: self.is_near_singular(),
            condition_estimate: self.condition,
            trace: self.trace(),
        }
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(FasError::domain(format!("sigma2 must be positive and finite, got {sigma2}")));
    }
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub numerical_rank: usize,
    pub rel_tol: f64,
    /// Absolute threshold `rel_tol * lambda_1`.
    pub tolerance_used: f64,
    pub eigval_profile: Vec<f64>,
    pub condition_estimate: f64,
}

/// JSON form of a [`CorrelationModel`]; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_ports: usize,
    pub width: f64,
    pub sigma2: f64,
    pub matrix_j: Vec<Vec<f64>>,
    pub eigvals: Vec<f64>,
    pub eigvecs: Vec<Vec<f64>>,
    pub det_j: f64,
    pub cofactor_k: Option<Vec<Vec<f64>>>,
    pub near_singular: bool,
    pub condition_estimate: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSpectrum {
    pub keep: usize,
    /// Full-length spectrum with entries past `keep` set to zero.
    pub eigvals: Vec<f64>,
    /// `||J - J~||_F = sqrt(sum_{n > keep} lambda_n^2)`.
    pub frobenius_error: f64,
}

impl TruncatedSpectrum {
    /// `U diag(lambda~) U^T`.
    pub fn covariance(&self, model: &CorrelationModel) -> DMatrix<f64> {
        let u = model.eigvecs();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigvals));
        u * d * u.transpose()
    }
}

/// Reference rank N′: numerical rank of the correlation matrix of a dense
/// `surrogate_n`-port aperture of the same width, standing in for the
/// N → ∞ limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NPrimeConfig {
    pub surrogate_n: usize,
    pub rel_tol: f64,
}

impl Default for NPrimeConfig {
    fn default() -> Self {
        NPrimeConfig { surrogate_n: 1024, rel_tol: 1e-3 }
    }
}

pub fn reference_rank_nprime(width: f64, sigma2: f64, cfg: &NPrimeConfig) -> Result<usize> {
    if cfg.surrogate_n < 256 {
        return Err(FasError::domain(format!(
            "surrogate_n must be at least 256, got {}",
            cfg.surrogate_n
        )));
    }
    if !(cfg.rel_tol > 0.0 && cfg.rel_tol < 1.0) {
        return Err(FasError::domain(format!("rel_tol must lie in (0, 1), got {}", cfg.rel_tol)));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(FasError::domain(format!("width must be positive and finite, got {width}")));
    }
    check_sigma2(sigma2)?;
    let n = cfg.surrogate_n;
    let spacing = width / (n - 1) as f64;
    let mut lags = Vec::with_capacity(n);
    for d in 0..n {
        lags.push(sigma2 * bessel_j0(2.0 * PI * d as f64 * spacing)?);
    }
    lags[0] = sigma2;
    let j = DMatrix::from_fn(n, n, |r, c| lags[r.abs_diff(c)]);
    let eigs = j.symmetric_eigenvalues();
    let top = eigs.max();
    Ok(eigs.iter().filter(|&&l| l > cfg.rel_tol * top).count())
}

/// Fréchet (2-Wasserstein) distance between zero-mean complex Gaussians
/// sharing eigenvectors: `sum_n (sqrt(lambda_n) - sqrt(lambda~_n))^2`.
/// Negative entries are clipped at zero before the square root.
pub fn frechet_distance(spectrum_a: &[f64], spectrum_b: &[f64]) -> Result<f64> {
    if spectrum_a.len() != spectrum_b.len() {
        return Err(FasError::domain(format!(
            "spectra differ in length: {} vs {}",
            spectrum_a.len(),
            spectrum_b.len()
        )));
    }
    Ok(spectrum_a
        .iter()
        .zip(spectrum_b)
        .map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2))
        .sum())
}
