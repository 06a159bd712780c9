//! Bivariate simulation study: data generation, closed-form population
//! connectedness, and Monte Carlo tables.
//!
//! The generator is the two-variable VAR(1)
//!
//!   x1_t = beta1 x1_{t-1} + s x2_{t-1} + e1_t
//!   x2_t = s x1_{t-1} + beta2 x2_{t-1} + e2_t
//!
//! with unit-variance innovations of correlation rho. Population measures
//! evaluate the spectral pipeline on the exact coefficients; the study
//! estimates a VAR(1) without intercept on each simulated panel (matching
//! the zero-mean generator) and aggregates means and standard deviations,
//! with and without decorrelating the residual covariance.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fevd::{gfevd, total_connectedness};
use crate::panel::TimeSeriesPanel;
use crate::rng::{derive_rng, StreamDomain};
use crate::spectral::{band_connectedness, decorrelate, BandPartition, SpectralDecomposition};
use crate::var::{estimate_var, ma_truncated, VarModel, VarSpec};

fn default_t() -> usize {
    1000
}

fn default_burn() -> usize {
    100
}

/// One cell of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateSpec {
    pub beta1: f64,
    pub beta2: f64,
    /// Cross-lag coefficient, shared by both equations.
    pub s: f64,
    /// Innovation correlation, in (-1, 1).
    pub rho: f64,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_burn")]
    pub burn: usize,
    pub seed: u64,
}

impl BivariateSpec {
    pub fn new(beta1: f64, beta2: f64, s: f64, rho: f64, seed: u64) -> Self {
        Self {
            beta1,
            beta2,
            s,
            rho,
            t: default_t(),
            burn: default_burn(),
            seed,
        }
    }

    /// The lag matrix [[beta1, s], [s, beta2]].
    pub fn phi(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.beta1, self.s, self.s, self.beta2])
    }

    /// The innovation covariance [[1, rho], [rho, 1]].
    pub fn sigma(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, self.rho, self.rho, 1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if self.t < 10 {
            return Err(Error::InvalidConfig(format!(
                "sample length {} is too short",
                self.t
            )));
        }
        Ok(())
    }

    /// Population model; errors when the implied VAR is nonstationary.
    pub fn model(&self) -> Result<VarModel> {
        self.validate()?;
        let model = VarModel::from_parts(vec![self.phi()], self.sigma())?;
        let radius = model.spectral_radius();
        if radius >= 1.0 {
            return Err(Error::Unstable {
                radius,
                context: format!(
                    "bivariate spec (beta1={}, beta2={}, s={})",
                    self.beta1, self.beta2, self.s
                ),
            });
        }
        Ok(model)
    }
}

/// Simulates one panel from the spec, discarding `burn` leading rows.
pub fn generate(spec: &BivariateSpec) -> Result<TimeSeriesPanel> {
    generate_indexed(spec, 0, 0)
}

/// Simulation with an explicit (replication, attempt) stream, so Monte Carlo
/// replications and redraws are independent and order-insensitive.
pub(crate) fn generate_indexed(
    spec: &BivariateSpec,
    index: u64,
    attempt: u64,
) -> Result<TimeSeriesPanel> {
    spec.model()?;
    let mut rng = derive_rng(spec.seed, StreamDomain::Simulation, index, attempt);
    // Cholesky factor of [[1, rho], [rho, 1]].
    let c21 = spec.rho;
    let c22 = (1.0 - spec.rho * spec.rho).sqrt();
    let mut x1 = 0.0f64;
    let mut x2 = 0.0f64;
    let mut values = DMatrix::<f64>::zeros(spec.t, 2);
    for step in 0..spec.burn + spec.t {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let e1 = z1;
        let e2 = c21 * z1 + c22 * z2;
        let n1 = spec.beta1 * x1 + spec.s * x2 + e1;
        let n2 = spec.s * x1 + spec.beta2 * x2 + e2;
        x1 = n1;
        x2 = n2;
        if step >= spec.burn {
            let r = step - spec.burn;
            values[(r, 0)] = x1;
            values[(r, 1)] = x2;
        }
    }
    TimeSeriesPanel::from_values(vec!["x1".to_string(), "x2".to_string()], values)
}

/// Population connectedness of a spec: total plus the band decomposition,
/// evaluated on the true coefficients with no estimation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConnectedness {
    pub total: f64,
    pub decomposition: SpectralDecomposition,
}

/// Evaluates the exact pipeline at truncation `h`. Table-grade accuracy
/// needs a long horizon, so h < 500 is rejected.
pub fn population_connectedness(
    spec: &BivariateSpec,
    h: usize,
    partition: &BandPartition,
) -> Result<PopulationConnectedness> {
    if h < 500 {
        return Err(Error::InvalidConfig(format!(
            "population horizon must be >= 500 for table-grade accuracy, got {h}"
        )));
    }
    let model = spec.model()?;
    let ma = ma_truncated(&model, h)?;
    let f = gfevd(&ma, model.sigma(), h)?;
    let decomposition = band_connectedness(&ma, model.sigma(), partition)?;
    Ok(PopulationConnectedness {
        total: total_connectedness(&f),
        decomposition,
    })
}

/// Mean and sample standard deviation over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MeanSd {
        mean,
        sd: var.sqrt(),
    }
}

/// Monte Carlo statistics for one measurement route (correlated residual
/// covariance or its decorrelated variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub total: MeanSd,
    /// Within-band connectedness C^W per band, partition order.
    pub within: Vec<MeanSd>,
    /// Frequency connectedness C^F per band, partition order.
    pub frequency: Vec<MeanSd>,
}

/// One grid cell's aggregated results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub spec: BivariateSpec,
    pub correlated: MeasureStats,
    pub decorrelated: MeasureStats,
    /// Number of extra draws forced by unstable or degenerate replications.
    pub redraws: usize,
}

/// The full study output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTable {
    pub bands: Vec<crate::spectral::FrequencyBand>,
    pub h: usize,
    pub replications: usize,
    pub rows: Vec<SimulationRow>,
}

impl SimulationTable {
    /// CSV layout: one row per cell, means and sds for total and per-band
    /// within measures, correlated then decorrelated.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "beta1,beta2,s,rho,t,seed,redraws,total_mean,total_sd")?;
        for b in &self.bands {
            let l = b.label();
            write!(w, ",within_{l}_mean,within_{l}_sd")?;
        }
        for b in &self.bands {
            let l = b.label();
            write!(w, ",frequency_{l}_mean,frequency_{l}_sd")?;
        }
        write!(w, ",decorr_total_mean,decorr_total_sd")?;
        for b in &self.bands {
            let l = b.label();
            write!(w, ",decorr_within_{l}_mean,decorr_within_{l}_sd")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            let s = &row.spec;
            write!(
                w,
                "{},{},{},{},{},{},{}",
                s.beta1, s.beta2, s.s, s.rho, s.t, s.seed, row.redraws
            )?;
            write!(
                w,
                ",{:.6},{:.6}",
                row.correlated.total.mean, row.correlated.total.sd
            )?;
            for m in &row.correlated.within {
                write!(w, ",{:.6},{:.6}", m.mean, m.sd)?;
            }
            for m in &row.correlated.frequency {
                write!(w, ",{:.6},{:.6}", m.mean, m.sd)?;
            }
            write!(
                w,
                ",{:.6},{:.6}",
                row.decorrelated.total.mean, row.decorrelated.total.sd
            )?;
            for m in &row.decorrelated.within {
                write!(w, ",{:.6},{:.6}", m.mean, m.sd)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Per-replication measurements for one route.
struct RouteDraw {
    total: f64,
    within: Vec<f64>,
    frequency: Vec<f64>,
}

struct ReplicationDraw {
    correlated: RouteDraw,
    decorrelated: RouteDraw,
    redraws: usize,
}

const MAX_ATTEMPTS_PER_REPLICATION: u64 = 10;

/// Runs the Monte Carlo study over a grid of cells.
///
/// Every replication simulates a panel, estimates a VAR(1) without intercept,
/// and measures connectedness twice: with the estimated residual covariance
/// and with its decorrelated (diagonal) version. Unstable or degenerate
/// replications are redrawn on a fresh substream, at most
/// `MAX_ATTEMPTS_PER_REPLICATION` times each.
pub fn run_study(
    grid: &[BivariateSpec],
    replications: usize,
    partition: &BandPartition,
    h: usize,
) -> Result<SimulationTable> {
    if replications < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 replications, got {replications}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty simulation grid".to_string()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (cell, spec) in grid.iter().enumerate() {
        spec.model()?;
        let draws: Vec<Result<ReplicationDraw>> = (0..replications as u64)
            .into_par_iter()
            .map(|rep| run_replication(spec, rep, partition, h, cell))
            .collect();
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;

        let redraws = draws.iter().map(|d| d.redraws).sum();
        let collect_route = |pick: &dyn Fn(&ReplicationDraw) -> &RouteDraw| -> MeasureStats {
            let totals: Vec<f64> = draws.iter().map(|d| pick(d).total).collect();
            let nb = partition.len();
            let within = (0..nb)
                .map(|b| mean_sd(&draws.iter().map(|d| pick(d).within[b]).collect::<Vec<_>>()))
                .collect();
            let frequency = (0..nb)
                .map(|b| {
                    mean_sd(&draws.iter().map(|d| pick(d).frequency[b]).collect::<Vec<_>>())
                })
                .collect();
            MeasureStats {
                total: mean_sd(&totals),
                within,
                frequency,
            }
        };
        rows.push(SimulationRow {
            spec: *spec,
            correlated: collect_route(&|d| &d.correlated),
            decorrelated: collect_route(&|d| &d.decorrelated),
            redraws,
        });
    }
    Ok(SimulationTable {
        bands: partition.bands().to_vec(),
        h,
        replications,
        rows,
    })
}

fn run_replication(
    spec: &BivariateSpec,
    rep: u64,
    partition: &BandPartition,
    h: usize,
    cell: usize,
) -> Result<ReplicationDraw> {
    let est_spec = VarSpec::new(1, false);
    for attempt in 0..MAX_ATTEMPTS_PER_REPLICATION {
        let panel = generate_indexed(spec, rep, attempt)?;
        let model = match estimate_var(&panel, &est_spec) {
            Ok(m) => m,
            Err(Error::SingularDesign { .. }) | Err(Error::DegenerateVariance { .. }) => continue,
            Err(e) => return Err(e),
        };
        if model.spectral_radius() >= 1.0 {
            continue;
        }
        let measure = |sigma: &DMatrix<f64>| -> Result<RouteDraw> {
            let ma = ma_truncated(&model, h)?;
            let f = gfevd(&ma, sigma, h)?;
            let dec = band_connectedness(&ma, sigma, partition)?;
            let total = total_connectedness(&f);
            let frequency: Vec<f64> = dec.frequency().to_vec();
            // Reconstruction identity, enforced per replication.
            let freq_sum: f64 = frequency.iter().sum();
            if (freq_sum - total).abs() > 1e-8 {
                return Err(Error::InvalidConfig(format!(
                    "frequency measures sum to {freq_sum} but the total is {total}"
                )));
            }
            let within = dec
                .within()
                .iter()
                .map(|w| w.unwrap_or(0.0))
                .collect::<Vec<_>>();
            Ok(RouteDraw {
                total,
                within,
                frequency,
            })
        };
        match (measure(model.sigma()), measure(&decorrelate(model.sigma()))) {
            (Ok(correlated), Ok(decorrelated)) => {
                return Ok(ReplicationDraw {
                    correlated,
                    decorrelated,
                    redraws: attempt as usize,
                })
            }
            (Err(Error::DegenerateVariance { .. }), _)
            | (_, Err(Error::DegenerateVariance { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Err(Error::SimulationExhausted {
        cell,
        attempts: MAX_ATTEMPTS_PER_REPLICATION as usize,
    })
}

/// Loads a study grid from CSV with columns beta1,beta2,s,rho,t,burn.
/// Cell seeds derive from `base_seed` plus the row index, so a grid run is
/// reproducible from (file, base_seed).
pub fn load_grid(path: &std::path::Path, base_seed: u64) -> Result<Vec<BivariateSpec>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: display.clone(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("grid file misses column '{name}'")))
    };
    let (c_b1, c_b2, c_s, c_rho, c_t, c_burn) = (
        col("beta1")?,
        col("beta2")?,
        col("s")?,
        col("rho")?,
        col("t")?,
        col("burn")?,
    );
    let mut grid = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: display.clone(),
            source,
        })?;
        let line = i + 2;
        let field = |c: usize, name: &str| -> Result<f64> {
            record
                .get(c)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::BadCell {
                    row: line,
                    column: name.to_string(),
                    detail: format!("{e}"),
                })
        };
        let spec = BivariateSpec {
            beta1: field(c_b1, "beta1")?,
            beta2: field(c_b2, "beta2")?,
            s: field(c_s, "s")?,
            rho: field(c_rho, "rho")?,
            t: field(c_t, "t")? as usize,
            burn: field(c_burn, "burn")? as usize,
            seed: base_seed.wrapping_add(i as u64),
        };
        spec.validate()?;
        grid.push(spec);
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty simulation grid".to_string()));
    }
    Ok(grid)
}

/// Steady-state autocovariance of a stable VAR(1), by fixed-point iteration
/// of Gamma0 = phi Gamma0 phi' + Sigma. Used as an independent oracle.
#[cfg(test)]
fn lyapunov_gamma0(phi: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = sigma.clone();
    for _ in 0..20_000 {
        let next = phi * &g * phi.transpose() + sigma;
        if (&next - &g).amax() < 1e-14 {
            return next;
        }
        g = next;
    }
    g
}
