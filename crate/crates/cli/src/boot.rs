//! Bootstrap tuning flags shared by `rolling` and `bootstrap-check`.

use std::str::FromStr;

use spillover::{BootstrapConfig, InnovationMode};

use crate::fileconf::{resolve, resolve_off_switch, resolve_opt, FileConfig};
use crate::CliError;

pub const BOOT_KEYS: [&str; 4] = ["innovations", "quantiles", "bias-correct", "seed"];

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum InnovationArg {
    /// Draw innovations from N(0, sigma-hat).
    Gaussian,
    /// Resample centered residual rows with replacement.
    ResampleResiduals,
}

impl FromStr for InnovationArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "resample-residuals" | "resample_residuals" => Ok(Self::ResampleResiduals),
            other => Err(format!(
                "unknown innovation mode '{other}' (expected 'gaussian' or 'resample-residuals')"
            )),
        }
    }
}

impl From<InnovationArg> for InnovationMode {
    fn from(a: InnovationArg) -> Self {
        match a {
            InnovationArg::Gaussian => InnovationMode::Gaussian,
            InnovationArg::ResampleResiduals => InnovationMode::ResampleResiduals,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct BootTuningArgs {
    /// Bootstrap innovation scheme.
    #[arg(long, value_enum)]
    pub innovations: Option<InnovationArg>,

    /// Quantile levels for the bands, e.g. "0.05,0.95".
    #[arg(long)]
    pub quantiles: Option<String>,

    /// Report raw bootstrap quantiles without bias correction.
    #[arg(long)]
    pub no_bias_correct: bool,

    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl BootTuningArgs {
    pub fn any_explicit(&self) -> bool {
        self.innovations.is_some()
            || self.quantiles.is_some()
            || self.no_bias_correct
            || self.seed.is_some()
    }

    pub fn resolve(
        &self,
        file: &FileConfig,
        replications: usize,
    ) -> Result<BootstrapConfig, CliError> {
        let mut cfg = BootstrapConfig::new(resolve(self.seed, file, "seed", 0)?);
        cfg.replications = replications;
        if let Some(mode) = resolve_opt(self.innovations, file, "innovations")? {
            cfg.innovation_mode = mode.into();
        }
        if let Some(levels) = resolve_opt(self.quantiles.clone(), file, "quantiles")? {
            cfg.quantiles = parse_quantiles(&levels)?;
        }
        cfg.bias_correct = resolve_off_switch(self.no_bias_correct, file, "bias-correct", true)?;
        Ok(cfg)
    }
}

fn parse_quantiles(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("cannot parse quantile '{}'", tok.trim())))
        })
        .collect()
}
