//! `--config` JSON document. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.
//!
//! ```json
//! {
//!   "n": 50, "w": [0.5, 1, 2], "sigma2": 1.0, "q": 10,
//!   "snr_db": [20, 30, 40], "s0": 20, "eps_tol": 0.01, "eps_rank": 3,
//!   "trials": 1000000, "seed": 0, "method": "mc", "scheme": "fas",
//!   "mode": "surface", "points": 50, "rmax": 2.5, "keep": 8,
//!   "schemes": ["mrc", "fas", "sc", "siso"], "rank_tol": 1e-12
//! }
//! ```

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Option<usize>,
    pub w: Option<OneOrMany>,
    pub sigma2: Option<f64>,
    pub q: Option<f64>,
    pub snr_db: Option<OneOrMany>,
    pub s0: Option<usize>,
    pub eps_tol: Option<f64>,
    pub eps_rank: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub scheme: Option<String>,
    pub mode: Option<String>,
    pub points: Option<usize>,
    pub rmax: Option<f64>,
    pub keep: Option<usize>,
    pub schemes: Option<Vec<String>>,
    pub rank_tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn widths(&self) -> Option<Vec<f64>> {
        self.w.clone().map(OneOrMany::into_vec)
    }

    pub fn snrs(&self) -> Option<Vec<f64>> {
        self.snr_db.clone().map(OneOrMany::into_vec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_and_lists() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"w": 0.5, "snr_db": [10, 20]}"#).unwrap();
        assert_eq!(c.widths(), Some(vec![0.5]));
        assert_eq!(c.snrs(), Some(vec![10.0, 20.0]));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
