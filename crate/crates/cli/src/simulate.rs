//! `spillover simulate`: bivariate Monte Carlo study over a parameter grid,
//! or with --population the closed-form connectedness of each grid cell.
//! Grids come from a CSV file or from one of the bundled tables; bundled
//! grids are materialized into the output directory as grid.csv.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spillover::{load_grid, population_connectedness, run_study, BivariateSpec};

use crate::fileconf::{resolve, resolve_opt, resolve_switch, FileConfig};
use crate::manifest::{load_rerun, CommandRun};
use crate::model::BandEdge;
use crate::{bands, CliError, CliResult};

/// The band split used by the reference tables, ascending.
pub const QUARTER_BANDS: &str = "0-pi/4,pi/4-pi/2,pi/2-pi";

pub fn bundled_grid(name: &str) -> Option<&'static str> {
    match name {
        "table1" => Some(include_str!("../grids/table1.csv")),
        "table2" => Some(include_str!("../grids/table2.csv")),
        "table3" => Some(include_str!("../grids/table3.csv")),
        "trueparams" => Some(include_str!("../grids/trueparams.csv")),
        _ => None,
    }
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Parameter grid CSV with columns beta1,beta2,s,rho,t,burn.
    #[arg(long, conflicts_with = "table")]
    grid: Option<PathBuf>,

    /// Bundled grid: table1, table2, table3, or trueparams.
    #[arg(long)]
    table: Option<String>,

    /// Monte Carlo replications per grid cell.
    #[arg(long, short = 'R')]
    replications: Option<usize>,

    /// Base RNG seed; cell i draws from seed + i.
    #[arg(long)]
    seed: Option<u64>,

    /// MA truncation horizon (frequency grid size).
    #[arg(long)]
    horizon: Option<usize>,

    /// Frequency bands (same grammar as estimate).
    #[arg(long)]
    bands: Option<String>,

    /// Evaluate the exact population measures of each cell instead of
    /// simulating (no estimation step).
    #[arg(long)]
    population: bool,

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
#[serde(tag = "source", rename_all = "snake_case")]
enum GridSource {
    File { path: String },
    Bundled { name: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulateConfig {
    grid: GridSource,
    replications: usize,
    seed: u64,
    horizon: usize,
    bands: String,
    population: bool,
    resolved_bands: Vec<BandEdge>,
}

#[derive(Serialize)]
struct PopulationRow {
    beta1: f64,
    beta2: f64,
    s: f64,
    rho: f64,
    total: f64,
    within: Vec<Option<f64>>,
    frequency: Vec<f64>,
}

const KEYS: [&str; 7] = [
    "grid",
    "table",
    "replications",
    "seed",
    "horizon",
    "bands",
    "population",
];

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let out = args
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let cfg: SimulateConfig = match &args.from_manifest {
        Some(path) => {
            let explicit = args.grid.is_some()
                || args.table.is_some()
                || args.replications.is_some()
                || args.seed.is_some()
                || args.horizon.is_some()
                || args.bands.is_some()
                || args.population
                || args.config.is_some();
            if explicit {
                return Err(CliError::usage(
                    "--from-manifest replays a recorded configuration; only --out and --threads may be combined with it",
                ));
            }
            load_rerun(path, "simulate", bundled_grid)?
        }
        None => resolve_config(&args)?,
    };

    let mut run = CommandRun::new("simulate", &out, &cfg)?;
    run.set_seed(cfg.seed);

    let partition = parse_bands(&cfg)?;
    let grid = load_specs(&mut run, &cfg)?;

    if cfg.population {
        run_population(&mut run, &cfg, &grid, &partition)?;
    } else {
        run_monte_carlo(&mut run, &cfg, &grid, &partition)?;
    }
    println!("wrote outputs and manifest.json to {}", out.display());
    run.finish()
}

fn resolve_config(args: &SimulateArgs) -> CliResult<SimulateConfig> {
    let file = FileConfig::load(args.config.as_deref(), &KEYS)?;
    let grid_path = resolve_opt(args.grid.clone(), &file, "grid")?;
    let table = resolve_opt(args.table.clone(), &file, "table")?;
    let grid = match (grid_path, table) {
        (Some(path), None) => GridSource::File {
            path: path.display().to_string(),
        },
        (None, Some(name)) => {
            if bundled_grid(&name).is_none() {
                return Err(CliError::usage(format!(
                    "unknown bundled table '{name}' (expected table1, table2, table3, or trueparams)"
                )));
            }
            GridSource::Bundled { name }
        }
        (None, None) => return Err(CliError::usage("one of --grid or --table is required")),
        (Some(_), Some(_)) => {
            return Err(CliError::usage("--grid and --table are mutually exclusive"))
        }
    };

    let population = resolve_switch(args.population, &file, "population", false)?;
    let replications = resolve(args.replications, &file, "replications", 100)?;
    let default_horizon = if population { 2048 } else { 1024 };
    let mut cfg = SimulateConfig {
        grid,
        replications,
        seed: resolve(args.seed, &file, "seed", 0)?,
        horizon: resolve(args.horizon, &file, "horizon", default_horizon)?,
        bands: resolve(args.bands.clone(), &file, "bands", QUARTER_BANDS.into())?,
        population,
        resolved_bands: Vec::new(),
    };
    let parsed = bands::parse_partition(&cfg.bands, true)?;
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

fn parse_bands(cfg: &SimulateConfig) -> CliResult<spillover::BandPartition> {
    let parsed = bands::parse_partition(&cfg.bands, true)?;
    let bands = parsed.partition.bands();
    let matches = bands.len() == cfg.resolved_bands.len()
        && bands
            .iter()
            .zip(&cfg.resolved_bands)
            .all(|(b, r)| b.label() == r.label && b.lower() == r.lower && b.upper() == r.upper);
    if !matches {
        return Err(CliError::usage(format!(
            "band list '{}' no longer resolves to the bands recorded in the manifest",
            cfg.bands
        )));
    }
    Ok(parsed.partition)
}

fn load_specs(run: &mut CommandRun, cfg: &SimulateConfig) -> CliResult<Vec<BivariateSpec>> {
    match &cfg.grid {
        GridSource::File { path } => {
            let path = Path::new(path);
            run.record_input_file(path)?;
            Ok(load_grid(path, cfg.seed)?)
        }
        GridSource::Bundled { name } => {
            let text = bundled_grid(name).ok_or_else(|| {
                CliError::usage(format!("unknown bundled table '{name}'"))
            })?;
            run.record_bundled_input(name, text);
            let path = run.write_output("grid.csv", text.as_bytes())?;
            Ok(load_grid(&path, cfg.seed)?)
        }
    }
}

fn run_population(
    run: &mut CommandRun,
    cfg: &SimulateConfig,
    grid: &[BivariateSpec],
    partition: &spillover::BandPartition,
) -> CliResult<()> {
    let mut rows = Vec::with_capacity(grid.len());
    for spec in grid {
        let pop = population_connectedness(spec, cfg.horizon, partition)?;
        rows.push(PopulationRow {
            beta1: spec.beta1,
            beta2: spec.beta2,
            s: spec.s,
            rho: spec.rho,
            total: pop.total,
            within: pop.decomposition.within().to_vec(),
            frequency: pop.decomposition.frequency().to_vec(),
        });
    }

    let mut csv = String::from("beta1,beta2,s,rho,total");
    for band in partition.bands() {
        let label = band.label();
        csv.push_str(&format!(",within_{label},frequency_{label}"));
    }
    csv.push('\n');
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.6}",
            row.beta1, row.beta2, row.s, row.rho, row.total
        ));
        for d in 0..partition.len() {
            match row.within[d] {
                Some(v) => csv.push_str(&format!(",{v:.6}")),
                None => csv.push(','),
            }
            csv.push_str(&format!(",{:.6}", row.frequency[d]));
        }
        csv.push('\n');
    }
    run.write_output("population.csv", csv.as_bytes())?;

    let mut json = serde_json::to_vec_pretty(&rows)?;
    json.push(b'\n');
    run.write_output("population.json", &json)?;

    println!(
        "population connectedness for {} cells at H = {}",
        rows.len(),
        cfg.horizon
    );
    Ok(())
}

fn run_monte_carlo(
    run: &mut CommandRun,
    cfg: &SimulateConfig,
    grid: &[BivariateSpec],
    partition: &spillover::BandPartition,
) -> CliResult<()> {
    let table = run_study(grid, cfg.replications, partition, cfg.horizon)?;

    let mut csv = Vec::new();
    table
        .write_csv(&mut csv)
        .map_err(|e| CliError::usage(format!("cannot render table.csv: {e}")))?;
    run.write_output("table.csv", &csv)?;

    let mut json = serde_json::to_vec_pretty(&table)?;
    json.push(b'\n');
    run.write_output("table.json", &json)?;

    for (i, row) in table.rows.iter().enumerate() {
        if row.redraws > 0 {
            run.add_failure(format!(
                "cell {i} ({}, {}, {}, {}): {} replications redrawn",
                row.spec.beta1, row.spec.beta2, row.spec.s, row.spec.rho, row.redraws
            ));
        }
    }

    println!(
        "simulated {} cells x {} replications at H = {}",
        table.rows.len(),
        table.replications,
        cfg.horizon
    );
    Ok(())
}
