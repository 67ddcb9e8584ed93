use thiserror::Error;

pub type Result<T> = std::result::Result<T, FasError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FasError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "correlation matrix is near-singular (det = {det:e}, condition = {condition:e}); \
         reduce the system to N* = {n_star} ports before evaluating this expression"
    )]
    NearSingular {
        det: f64,
        condition: f64,
        n_star: usize,
    },

    #[error(
        "series evaluation is capped at {max_ports} ports (got {n_ports}); the number of \
         multi-indices grows combinatorially in N(N-1)/2, use eq15, asymptote or mc instead"
    )]
    SeriesCap { n_ports: usize, max_ports: usize },

    #[error("quadrature did not converge on [{lower}, {upper}]: estimate {value:e}, error {error:e} after {evaluations} evaluations")]
    Quadrature {
        lower: f64,
        upper: f64,
        value: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("too few outage events at {snr_db} dB ({events} < {required}); increase trials or move the window")]
    InsufficientEvents {
        snr_db: f64,
        events: u64,
        required: u64,
    },

    #[error("internal numerical error: {0}")]
    Internal(String),
}

impl FasError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FasError::Domain(msg.into())
    }
}
