//! Shared panel ingestion for subcommands that read a CSV input: either a
//! daily panel (date column + numeric series) or an intraday return file
//! (date,time,series,return) aggregated into daily log realized volatility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::{load_intraday, load_panel, realized_log_volatility, TimeSeriesPanel};

use crate::fileconf::{resolve, resolve_opt, resolve_switch, FileConfig};
use crate::CliError;

pub const INPUT_KEYS: [&str; 5] = ["input", "intraday", "rv-power", "date-column", "series"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: String,
    pub intraday: bool,
    /// Exponent applied to realized variance before the log (1 or 0.5);
    /// only meaningful for intraday input.
    pub rv_power: f64,
    pub date_column: String,
    pub series: Option<Vec<String>>,
}

impl InputSpec {
    pub fn load(&self) -> Result<TimeSeriesPanel, CliError> {
        let path = Path::new(&self.path);
        if self.intraday {
            let returns = load_intraday(path, "unspecified")?;
            let panel = realized_log_volatility(&returns, self.rv_power)?;
            if let Some(filter) = &self.series {
                return Err(CliError::usage(format!(
                    "series filters do not apply to intraday input (got {filter:?}); \
                     filter the return file instead"
                )));
            }
            Ok(panel)
        } else {
            Ok(load_panel(path, &self.date_column, self.series.as_deref())?)
        }
    }
}

/// Flags shared by every panel-reading subcommand.
#[derive(Debug, clap::Args)]
pub struct InputArgs {
    /// CSV input: a panel (date column plus numeric series), or with
    /// --intraday a return file with columns date,time,series,return.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Treat the input as intraday returns and aggregate each day into
    /// log realized volatility.
    #[arg(long)]
    pub intraday: bool,

    /// Exponent on realized variance before the log: 1 (log variance) or
    /// 0.5 (log volatility).
    #[arg(long)]
    pub rv_power: Option<f64>,

    /// Name of the panel's date column.
    #[arg(long)]
    pub date_column: Option<String>,

    /// Comma-separated series subset, in output order.
    #[arg(long)]
    pub series: Option<String>,
}

impl InputArgs {
    pub fn any_explicit(&self) -> bool {
        self.input.is_some()
            || self.intraday
            || self.rv_power.is_some()
            || self.date_column.is_some()
            || self.series.is_some()
    }

    pub fn resolve(&self, file: &FileConfig) -> Result<InputSpec, CliError> {
        let path = match &self.input {
            Some(p) => p.display().to_string(),
            None => file
                .raw("input")
                .map(str::to_string)
                .ok_or_else(|| CliError::usage("--input is required"))?,
        };
        let rv_power = resolve(self.rv_power, file, "rv-power", 1.0)?;
        if rv_power != 1.0 && rv_power != 0.5 {
            return Err(CliError::usage(format!(
                "--rv-power must be 1 or 0.5, got {rv_power}"
            )));
        }
        let series = resolve_opt(self.series.clone(), file, "series")?
            .map(|list: String| list.split(',').map(|s| s.trim().to_string()).collect());
        Ok(InputSpec {
            path,
            intraday: resolve_switch(self.intraday, file, "intraday", false)?,
            rv_power,
            date_column: resolve(self.date_column.clone(), file, "date-column", "date".into())?,
            series,
        })
    }
}
