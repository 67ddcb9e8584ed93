//! Special functions with stated accuracy contracts.
//!
//! Everything here is a pure function of its arguments.

mod bessel;
mod gamma;
mod marcum;

pub use bessel::{bessel_i0_scaled, bessel_j0, J0_SERIES_LIMIT};
pub use gamma::{gamma, gamma_lower_upper, ln_gamma};
pub use marcum::{marcum_q1, MARCUM_SERIES_LIMIT};

use crate::{FasError, Result};

/// Absolute/relative tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AccuracySpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl AccuracySpec {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) {
            return Err(FasError::domain(format!(
                "tolerances must be strictly positive (abs {abs_tol}, rel {rel_tol})"
            )));
        }
        Ok(AccuracySpec { abs_tol, rel_tol })
    }

    /// `|a - b| <= abs_tol + rel_tol * max(|a|, |b|)`.
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }
}

impl Default for AccuracySpec {
    fn default() -> Self {
        AccuracySpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        }
    }
}
