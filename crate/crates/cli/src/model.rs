//! Estimation flags shared by the panel subcommands: VAR order, intercept,
//! ridge, truncation horizon, and the frequency band list.

use serde::{Deserialize, Serialize};
use spillover::VarSpec;

use crate::bands::{parse_partition, ParsedPartition};
use crate::fileconf::{resolve, resolve_off_switch, resolve_opt, FileConfig};
use crate::CliError;

pub const MODEL_KEYS: [&str; 6] = [
    "lags",
    "intercept",
    "ridge",
    "horizon",
    "bands",
    "require-partition",
];

#[derive(Debug, clap::Args)]
pub struct ModelArgs {
    /// VAR lag order p.
    #[arg(long)]
    pub lags: Option<usize>,

    /// Drop the intercept from every equation.
    #[arg(long)]
    pub no_intercept: bool,

    /// Ridge penalty added to the regressor cross-product, for windows
    /// with a near-singular design.
    #[arg(long)]
    pub ridge: Option<f64>,

    /// MA truncation horizon H; also the frequency grid size.
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Frequency bands, e.g. "1-5,5-20,20-inf:days" or "0-pi/2,pi/2-pi".
    #[arg(long)]
    pub bands: Option<String>,

    /// Accept band lists that do not tile (0, pi]; uncovered stretches are
    /// filled with auto-labeled bands.
    #[arg(long)]
    pub no_require_partition: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandEdge {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lags: usize,
    pub intercept: bool,
    pub ridge: Option<f64>,
    pub horizon: usize,
    pub bands: String,
    pub require_partition: bool,
    /// Band edges the grammar resolved to, recorded for reruns: a rerun
    /// re-parses `bands` and refuses to proceed on any drift.
    pub resolved_bands: Vec<BandEdge>,
}

impl ModelArgs {
    pub fn any_explicit(&self) -> bool {
        self.lags.is_some()
            || self.no_intercept
            || self.ridge.is_some()
            || self.horizon.is_some()
            || self.bands.is_some()
            || self.no_require_partition
    }

    pub fn resolve(&self, file: &FileConfig, default_bands: &str) -> Result<ModelConfig, CliError> {
        let lags = resolve(self.lags, file, "lags", 2)?;
        if lags == 0 {
            return Err(CliError::usage("--lags must be at least 1"));
        }
        let horizon = resolve(self.horizon, file, "horizon", 100)?;
        if horizon == 0 {
            return Err(CliError::usage("--horizon must be at least 1"));
        }
        let mut cfg = ModelConfig {
            lags,
            intercept: resolve_off_switch(self.no_intercept, file, "intercept", true)?,
            ridge: resolve_opt(self.ridge, file, "ridge")?,
            horizon,
            bands: resolve(self.bands.clone(), file, "bands", default_bands.into())?,
            require_partition: resolve_off_switch(
                self.no_require_partition,
                file,
                "require-partition",
                true,
            )?,
            resolved_bands: Vec::new(),
        };
        let parsed = parse_partition(&cfg.bands, cfg.require_partition)?;
        cfg.resolved_bands = parsed
            .partition
            .bands()
            .iter()
            .map(|b| BandEdge {
                label: b.label().to_string(),
                lower: b.lower(),
                upper: b.upper(),
            })
            .collect();
        Ok(cfg)
    }
}

impl ModelConfig {
    pub fn var_spec(&self) -> VarSpec {
        let mut spec = VarSpec::new(self.lags, self.intercept);
        spec.ridge = self.ridge;
        spec
    }

    /// Re-parses the band grammar and cross-checks it against the recorded
    /// edges, so a manifest rerun cannot silently see different bands.
    pub fn partition(&self) -> Result<ParsedPartition, CliError> {
        let parsed = parse_partition(&self.bands, self.require_partition)?;
        let bands = parsed.partition.bands();
        let matches = bands.len() == self.resolved_bands.len()
            && bands.iter().zip(&self.resolved_bands).all(|(b, r)| {
                b.label() == r.label && b.lower() == r.lower && b.upper() == r.upper
            });
        if !matches {
            return Err(CliError::usage(format!(
                "band list '{}' no longer resolves to the bands recorded in the manifest",
                self.bands
            )));
        }
        Ok(parsed)
    }
}
