//! Outage probability, diversity gain and suboptimal port-count analysis for
//! fluid antenna systems (FAS) under spatially correlated Rayleigh fading.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: Bessel J₀, gamma, incomplete gamma and Marcum Q₁.
//! * [`quad`]: adaptive Gauss–Kronrod quadrature used by the semi-analytic
//!   evaluators.
//! * [`correlation`]: the Jakes-model port correlation matrix, its spectrum,
//!   cofactors, numerical rank and low-rank truncation.
//! * [`channel`]: reproducible correlated channel generation.
//! * [`analytic`]: series, asymptotic and single-integral outage evaluators,
//!   diversity gain and the N* port-count search.
//! * [`simulate`]: Monte Carlo outage estimation for FAS, SISO, SC and MRC.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod correlation;
mod error;
pub mod quad;
pub mod simulate;
pub mod specfun;

pub use error::{FasError, Result};

/// Complex channel coefficient type used throughout the crate.
pub type Complex = num_complex::Complex64;
