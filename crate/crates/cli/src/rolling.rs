//! `spillover rolling`: slide a fixed window over a panel and emit
//! connectedness paths, optionally with bootstrap bands and SVG plots.
//! With --decorrelate, a second measure set computed on the decorrelated
//! residual covariance lands in the same output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::{run_rolling, BootstrapConfig, ConnectednessPath, RollingConfig};

use crate::boot::{BootTuningArgs, BOOT_KEYS};
use crate::estimate::DAILY_BANDS;
use crate::fileconf::{resolve, resolve_opt, resolve_switch, FileConfig};
use crate::input::{InputArgs, InputSpec, INPUT_KEYS};
use crate::manifest::{load_rerun, CommandRun};
use crate::model::{ModelArgs, ModelConfig, MODEL_KEYS};
use crate::svg::{line_chart, stacked_chart, Ribbon, SeriesLine};
use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct RollingArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Window length in observations.
    #[arg(long)]
    window: Option<usize>,

    /// Distance between consecutive window starts.
    #[arg(long)]
    step: Option<usize>,

    /// Also compute the decorrelated measure set (second file set in the
    /// same output directory).
    #[arg(long)]
    decorrelate: bool,

    /// Attach bootstrap bias correction and quantile bands, with this many
    /// replications per window.
    #[arg(long, value_name = "B")]
    bootstrap: Option<usize>,

    #[command(flatten)]
    boot: BootTuningArgs,

    /// Emit SVG plots of the measured paths.
    #[arg(long)]
    svg: bool,

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
struct RollingCliConfig {
    input: InputSpec,
    model: ModelConfig,
    window: usize,
    step: usize,
    decorrelate: bool,
    bootstrap: Option<BootstrapConfig>,
    svg: bool,
}

fn allowed_keys() -> Vec<&'static str> {
    let mut keys = INPUT_KEYS.to_vec();
    keys.extend_from_slice(&MODEL_KEYS);
    keys.extend_from_slice(&BOOT_KEYS);
    keys.extend_from_slice(&["window", "step", "decorrelate", "bootstrap", "svg"]);
    keys
}

pub fn run(args: RollingArgs) -> CliResult<()> {
    let out = args
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let cfg: RollingCliConfig = match &args.from_manifest {
        Some(path) => {
            let explicit = args.input.any_explicit()
                || args.model.any_explicit()
                || args.window.is_some()
                || args.step.is_some()
                || args.decorrelate
                || args.bootstrap.is_some()
                || args.boot.any_explicit()
                || args.svg
                || args.config.is_some();
            if explicit {
                return Err(CliError::usage(
                    "--from-manifest replays a recorded configuration; only --out and --threads may be combined with it",
                ));
            }
            load_rerun(path, "rolling", |_| None)?
        }
        None => {
            let file = FileConfig::load(args.config.as_deref(), &allowed_keys())?;
            let replications = resolve_opt(args.bootstrap, &file, "bootstrap")?;
            let bootstrap = replications
                .map(|b| args.boot.resolve(&file, b))
                .transpose()?;
            if bootstrap.is_none() && args.boot.any_explicit() {
                return Err(CliError::usage(
                    "bootstrap tuning flags require --bootstrap <B>",
                ));
            }
            RollingCliConfig {
                input: args.input.resolve(&file)?,
                model: args.model.resolve(&file, DAILY_BANDS)?,
                window: resolve(args.window, &file, "window", 300)?,
                step: resolve(args.step, &file, "step", 1)?,
                decorrelate: resolve_switch(args.decorrelate, &file, "decorrelate", false)?,
                bootstrap,
                svg: resolve_switch(args.svg, &file, "svg", false)?,
            }
        }
    };

    let mut run = CommandRun::new("rolling", &out, &cfg)?;
    run.record_input_file(Path::new(&cfg.input.path))?;
    if let Some(b) = &cfg.bootstrap {
        run.set_seed(b.seed);
    }

    let panel = cfg.input.load()?;
    let parsed = cfg.model.partition()?;
    let core_cfg = RollingConfig {
        window_length: cfg.window,
        step: cfg.step,
        var_spec: cfg.model.var_spec(),
        h: cfg.model.horizon,
        partition: parsed.partition,
        decorrelate: false,
        bootstrap: cfg.bootstrap.clone(),
    };

    let path = run_rolling(&panel, &core_cfg)?;
    write_path(&mut run, &path, "")?;
    if cfg.svg {
        write_svgs(&mut run, &path, "")?;
    }
    for gap in &path.gaps {
        run.add_failure(format!("{}: {}", gap.date, gap.reason));
    }

    let mut decorrelated_summary = String::new();
    if cfg.decorrelate {
        let decorrelated_cfg = RollingConfig {
            decorrelate: true,
            ..core_cfg
        };
        let second = run_rolling(&panel, &decorrelated_cfg)?;
        write_path(&mut run, &second, "_decorrelated")?;
        if cfg.svg {
            write_svgs(&mut run, &second, "_decorrelated")?;
        }
        for gap in &second.gaps {
            run.add_failure(format!("decorrelated {}: {}", gap.date, gap.reason));
        }
        decorrelated_summary = format!(
            "; decorrelated set: {} windows, {} gaps",
            second.records.len(),
            second.gaps.len()
        );
    }

    println!(
        "rolling: {} windows measured, {} gaps{} (window {}, step {}, H {})",
        path.records.len(),
        path.gaps.len(),
        decorrelated_summary,
        cfg.window,
        cfg.step,
        cfg.model.horizon
    );
    println!("wrote outputs and manifest.json to {}", out.display());

    run.finish()
}

fn write_path(run: &mut CommandRun, path: &ConnectednessPath, suffix: &str) -> CliResult<()> {
    let mut csv = Vec::new();
    path.write_csv(&mut csv)
        .map_err(|e| CliError::usage(format!("cannot render path{suffix}.csv: {e}")))?;
    run.write_output(&format!("path{suffix}.csv"), &csv)?;

    let mut json = serde_json::to_vec_pretty(path)?;
    json.push(b'\n');
    run.write_output(&format!("path{suffix}.json"), &json)?;
    Ok(())
}

fn write_svgs(run: &mut CommandRun, path: &ConnectednessPath, suffix: &str) -> CliResult<()> {
    let dates: Vec<String> = path.records.iter().map(|r| r.date.to_string()).collect();
    let totals: Vec<f64> = path.records.iter().map(|r| r.total).collect();

    let quantile_edge = |pick: fn(&spillover::BootstrapMeasure) -> f64| -> Vec<f64> {
        path.records
            .iter()
            .map(|r| {
                r.bootstrap
                    .as_ref()
                    .and_then(|b| b.measures.iter().find(|m| m.name == "total"))
                    .map(pick)
                    .unwrap_or(f64::NAN)
            })
            .collect()
    };
    let ribbon = path.records.iter().any(|r| r.bootstrap.is_some()).then(|| Ribbon {
        lo: quantile_edge(|m| m.lower()),
        hi: quantile_edge(|m| m.upper()),
    });

    let total_lines = [SeriesLine {
        label: "total".to_string(),
        values: &totals,
    }];
    run.write_output(
        &format!("total{suffix}.svg"),
        line_chart("total connectedness", &dates, &total_lines, ribbon.as_ref()).as_bytes(),
    )?;

    let per_band = |measure: fn(&spillover::BandPathEntry) -> f64| -> Vec<Vec<f64>> {
        (0..path.bands.len())
            .map(|d| path.records.iter().map(|r| measure(&r.bands[d])).collect())
            .collect()
    };
    let within = per_band(|b| b.within.unwrap_or(f64::NAN));
    let frequency = per_band(|b| b.frequency);

    run.write_output(
        &format!("within{suffix}.svg"),
        line_chart(
            "within-band connectedness",
            &dates,
            &band_series(path, &within),
            None,
        )
        .as_bytes(),
    )?;
    run.write_output(
        &format!("frequency{suffix}.svg"),
        line_chart(
            "frequency-band connectedness",
            &dates,
            &band_series(path, &frequency),
            None,
        )
        .as_bytes(),
    )?;
    run.write_output(
        &format!("stacked{suffix}.svg"),
        stacked_chart(
            "frequency bands, stacked to the total",
            &dates,
            &band_series(path, &frequency),
        )
        .as_bytes(),
    )?;
    Ok(())
}

fn band_series<'a>(path: &ConnectednessPath, values: &'a [Vec<f64>]) -> Vec<SeriesLine<'a>> {
    path.bands
        .iter()
        .zip(values)
        .map(|(band, v)| SeriesLine {
            label: band.label().to_string(),
            values: v,
        })
        .collect()
}
