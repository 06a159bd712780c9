//! `spillover estimate`: one panel in, one static connectedness report out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::{
    band_connectedness, decorrelate, directional, estimate_var, gfevd, ma_truncated,
    total_connectedness, DirectionalSummary, FevdMatrix, SpectralDecomposition,
};

use crate::fileconf::{resolve_switch, FileConfig};
use crate::input::{InputArgs, InputSpec, INPUT_KEYS};
use crate::manifest::{load_rerun, CommandRun};
use crate::model::{ModelArgs, ModelConfig, MODEL_KEYS};
use crate::{CliError, CliResult};

pub const DAILY_BANDS: &str = "1-5,5-20,20-inf:days";

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Measure with the decorrelated (diagonal) residual covariance.
    #[arg(long)]
    decorrelate: bool,

    /// key = value configuration file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Rerun the exact configuration recorded in an earlier manifest.
    /// Only --out and --threads may be combined with this.
    #[arg(long)]
    from_manifest: Option<PathBuf>,

    /// Output directory for report.json, tables.csv, manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EstimateConfig {
    input: InputSpec,
    model: ModelConfig,
    decorrelate: bool,
}

#[derive(Serialize)]
struct EstimateReport {
    series: Vec<String>,
    observations: usize,
    first_date: String,
    last_date: String,
    radius: f64,
    ridge: bool,
    decorrelated: bool,
    total: f64,
    time_domain: FevdMatrix,
    directional: DirectionalSummary,
    decomposition: SpectralDecomposition,
}

fn allowed_keys() -> Vec<&'static str> {
    let mut keys = INPUT_KEYS.to_vec();
    keys.extend_from_slice(&MODEL_KEYS);
    keys.push("decorrelate");
    keys
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let out = args
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let cfg: EstimateConfig = match &args.from_manifest {
        Some(path) => {
            let explicit = args.input.any_explicit()
                || args.model.any_explicit()
                || args.decorrelate
                || args.config.is_some();
            if explicit {
                return Err(CliError::usage(
                    "--from-manifest replays a recorded configuration; only --out and --threads may be combined with it",
                ));
            }
            load_rerun(path, "estimate", |_| None)?
        }
        None => {
            let file = FileConfig::load(args.config.as_deref(), &allowed_keys())?;
            EstimateConfig {
                input: args.input.resolve(&file)?,
                model: args.model.resolve(&file, DAILY_BANDS)?,
                decorrelate: resolve_switch(args.decorrelate, &file, "decorrelate", false)?,
            }
        }
    };

    let mut run = CommandRun::new("estimate", &out, &cfg)?;
    run.record_input_file(Path::new(&cfg.input.path))?;

    let panel = cfg.input.load()?;
    let parsed = cfg.model.partition()?;
    let model = estimate_var(&panel, &cfg.model.var_spec())?;
    let sigma = if cfg.decorrelate {
        decorrelate(model.sigma())
    } else {
        model.sigma().clone()
    };
    let ma = ma_truncated(&model, cfg.model.horizon)?;
    let fevd = gfevd(&ma, &sigma, cfg.model.horizon)?;
    let decomposition = band_connectedness(&ma, &sigma, &parsed.partition)?;

    let report = EstimateReport {
        series: panel.names().to_vec(),
        observations: panel.len(),
        first_date: panel.dates().first().map(ToString::to_string).unwrap_or_default(),
        last_date: panel.dates().last().map(ToString::to_string).unwrap_or_default(),
        radius: model.spectral_radius(),
        ridge: cfg.model.ridge.is_some(),
        decorrelated: cfg.decorrelate,
        total: total_connectedness(&fevd),
        directional: directional(&fevd),
        time_domain: fevd,
        decomposition,
    };

    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    run.write_output("report.json", &json)?;

    let mut csv = Vec::new();
    report
        .decomposition
        .write_csv(panel.names(), &mut csv)
        .map_err(|e| CliError::usage(format!("cannot render tables.csv: {e}")))?;
    run.write_output("tables.csv", &csv)?;

    println!(
        "estimated VAR({}) on {} series x {} observations ({} to {}), spectral radius {:.4}",
        cfg.model.lags,
        report.series.len(),
        report.observations,
        report.first_date,
        report.last_date,
        report.radius
    );
    println!("total connectedness: {:.4}", report.total);
    for (d, band) in report.decomposition.bands().iter().enumerate() {
        let within = match report.decomposition.within()[d] {
            Some(v) => format!("{v:.4}"),
            None => "undefined".to_string(),
        };
        println!(
            "band {}: within {}, frequency {:.4}",
            band.label(),
            within,
            report.decomposition.frequency()[d]
        );
    }
    if !parsed.fillers.is_empty() {
        println!("note: gap-filler bands added: {}", parsed.fillers.join(", "));
    }
    println!("wrote report.json, tables.csv, manifest.json to {}", out.display());

    run.finish()
}
