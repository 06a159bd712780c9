//! `spillover bootstrap-check`: fit one VAR on the whole panel, bootstrap
//! it, and report bias-corrected measures with quantile bands. The measures
//! are the total plus each band's frequency connectedness, the same set the
//! rolling command attaches per window.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::{
    band_connectedness, bootstrap_window, decorrelate, estimate_var, ma_truncated,
    BootstrapConfig, BootstrapSummary, VarModel,
};

use crate::boot::{BootTuningArgs, BOOT_KEYS};
use crate::estimate::DAILY_BANDS;
use crate::fileconf::{resolve, resolve_switch, FileConfig};
use crate::input::{InputArgs, InputSpec, INPUT_KEYS};
use crate::manifest::{load_rerun, CommandRun};
use crate::model::{ModelArgs, ModelConfig, MODEL_KEYS};
use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct BootstrapCheckArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Measure with the decorrelated (diagonal) residual covariance.
    #[arg(long)]
    decorrelate: bool,

    /// Bootstrap replications.
    #[arg(long, short = 'B')]
    replications: Option<usize>,

    #[command(flatten)]
    boot: BootTuningArgs,

    /// key = value configuration file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Rerun the exact configuration recorded in an earlier manifest.
    /// Only --out and --threads may be combined with this.
    #[arg(long)]
    from_manifest: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BootstrapCheckConfig {
    input: InputSpec,
    model: ModelConfig,
    decorrelate: bool,
    bootstrap: BootstrapConfig,
}

#[derive(Serialize)]
struct BootstrapReport {
    series: Vec<String>,
    observations: usize,
    radius: f64,
    summary: BootstrapSummary,
}

fn allowed_keys() -> Vec<&'static str> {
    let mut keys = INPUT_KEYS.to_vec();
    keys.extend_from_slice(&MODEL_KEYS);
    keys.extend_from_slice(&BOOT_KEYS);
    keys.extend_from_slice(&["decorrelate", "replications"]);
    keys
}

pub fn run(args: BootstrapCheckArgs) -> CliResult<()> {
    let out = args
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let cfg: BootstrapCheckConfig = match &args.from_manifest {
        Some(path) => {
            let explicit = args.input.any_explicit()
                || args.model.any_explicit()
                || args.decorrelate
                || args.replications.is_some()
                || args.boot.any_explicit()
                || args.config.is_some();
            if explicit {
                return Err(CliError::usage(
                    "--from-manifest replays a recorded configuration; only --out and --threads may be combined with it",
                ));
            }
            load_rerun(path, "bootstrap-check", |_| None)?
        }
        None => {
            let file = FileConfig::load(args.config.as_deref(), &allowed_keys())?;
            let replications = resolve(args.replications, &file, "replications", 500)?;
            BootstrapCheckConfig {
                input: args.input.resolve(&file)?,
                model: args.model.resolve(&file, DAILY_BANDS)?,
                decorrelate: resolve_switch(args.decorrelate, &file, "decorrelate", false)?,
                bootstrap: args.boot.resolve(&file, replications)?,
            }
        }
    };

    let mut run = CommandRun::new("bootstrap-check", &out, &cfg)?;
    run.record_input_file(Path::new(&cfg.input.path))?;
    run.set_seed(cfg.bootstrap.seed);

    let panel = cfg.input.load()?;
    let parsed = cfg.model.partition()?;
    let model = estimate_var(&panel, &cfg.model.var_spec())?;

    let mut names = vec!["total".to_string()];
    for band in parsed.partition.bands() {
        names.push(format!("frequency:{}", band.label()));
    }
    let horizon = cfg.model.horizon;
    let use_decorrelated = cfg.decorrelate;
    let partition = parsed.partition;
    let evaluate = |m: &VarModel| -> spillover::Result<Vec<f64>> {
        let sigma = if use_decorrelated {
            decorrelate(m.sigma())
        } else {
            m.sigma().clone()
        };
        let ma = ma_truncated(m, horizon)?;
        let dec = band_connectedness(&ma, &sigma, &partition)?;
        let mut out = vec![dec.total()];
        out.extend_from_slice(dec.frequency());
        Ok(out)
    };
    let summary = bootstrap_window(&model, &cfg.bootstrap, &names, evaluate)?;

    if summary.redraws > 0 {
        run.add_failure(format!("{} replications redrawn", summary.redraws));
    }

    let report = BootstrapReport {
        series: panel.names().to_vec(),
        observations: panel.len(),
        radius: model.spectral_radius(),
        summary,
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    run.write_output("bootstrap.json", &json)?;

    println!(
        "bootstrap: {} replications, {} redraws, innovation mode recorded in manifest",
        report.summary.replications, report.summary.redraws
    );
    println!(
        "{:<28} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "measure", "point", "corrected", "lower", "median", "upper"
    );
    for m in &report.summary.measures {
        println!(
            "{:<28} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            m.name,
            m.point,
            m.corrected,
            m.lower(),
            m.median,
            m.upper()
        );
    }
    println!("wrote bootstrap.json and manifest.json to {}", out.display());

    run.finish()
}
