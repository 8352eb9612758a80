//! Run configuration persisted as a key-value TOML document. Command-line
//! flags override file values; the file is the provenance record of a run.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Every parameter any subcommand accepts, all optional. Keys use the
/// same spelling as the command-line flags so a config file reads like a
/// frozen invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub case: Option<String>,
    #[serde(rename = "dA")]
    pub d_a: Option<usize>,
    #[serde(rename = "dB")]
    pub d_b: Option<usize>,
    pub r: Option<usize>,
    pub eps: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub threshold: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "logM")]
    pub log_m: Option<f64>,
    #[serde(rename = "cEnsemble")]
    pub c_ensemble: Option<f64>,
    #[serde(rename = "cPack")]
    pub c_pack: Option<f64>,
    #[serde(rename = "N")]
    pub n_queries: Option<usize>,
    #[serde(rename = "auxDim")]
    pub aux_dim: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub dir: Option<PathBuf>,
    #[serde(rename = "rankTol")]
    pub rank_tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Seed resolution order: explicit flag, config file, DIAMONDLAB_SEED
/// environment variable, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| {
            std::env::var("DIAMONDLAB_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0)
}
