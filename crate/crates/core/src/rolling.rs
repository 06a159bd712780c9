//! Rolling-window connectedness paths.
//!
//! A fixed-length window slides over the panel; each window runs the full
//! estimate -> MA -> FEVD -> band split pipeline and yields one record,
//! labeled by the window's END date (the measure is known at that date).
//! Windows that fail (singular design, unstable fit, degenerate variance,
//! exhausted bootstrap) become structured gap records, never silent drops.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::bootstrap::{bootstrap_window, BootstrapConfig, BootstrapSummary};
use crate::error::{Error, Result};
use crate::fevd::{gfevd, total_connectedness};
use crate::panel::TimeSeriesPanel;
use crate::spectral::{band_connectedness, band_indices, decorrelate, BandPartition, FrequencyBand};
use crate::var::{estimate_var, ma_truncated, VarModel, VarSpec};

fn default_window() -> usize {
    300
}

fn default_step() -> usize {
    1
}

fn default_h() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    #[serde(default = "default_window")]
    pub window_length: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default)]
    pub var_spec: VarSpec,
    #[serde(default = "default_h")]
    pub h: usize,
    pub partition: BandPartition,
    /// When set, every window's measures use the decorrelated (diagonal)
    /// residual covariance.
    #[serde(default)]
    pub decorrelate: bool,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
}

impl RollingConfig {
    pub fn new(partition: BandPartition) -> Self {
        Self {
            window_length: default_window(),
            step: default_step(),
            var_spec: VarSpec::default(),
            h: default_h(),
            partition,
            decorrelate: false,
            bootstrap: None,
        }
    }

    fn validate(&self, panel: &TimeSeriesPanel) -> Result<()> {
        if self.step < 1 {
            return Err(Error::InvalidConfig("step must be at least 1".to_string()));
        }
        if self.window_length > panel.len() {
            return Err(Error::InvalidConfig(format!(
                "zero complete windows: window length {} exceeds panel length {}",
                self.window_length,
                panel.len()
            )));
        }
        let n = panel.width();
        let p = self.var_spec.p;
        let z = n * p + usize::from(self.var_spec.include_intercept);
        if self.window_length <= p || self.window_length - p <= z {
            return Err(Error::InvalidConfig(format!(
                "window length {} cannot estimate a VAR({}) with {} parameters per equation on {} series",
                self.window_length, p, z, n
            )));
        }
        // A partition/grid mismatch would fail every window identically;
        // surface it as one configuration error up front.
        for band in self.partition.bands() {
            band_indices(band, self.h)?;
        }
        if let Some(b) = &self.bootstrap {
            b.validate()?;
        }
        Ok(())
    }
}

/// One band's slice of a window record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPathEntry {
    pub band: FrequencyBand,
    pub within: Option<f64>,
    pub frequency: f64,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub net: Vec<f64>,
}

/// One successfully measured window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub date: NaiveDate,
    pub total: f64,
    pub bands: Vec<BandPathEntry>,
    pub radius: f64,
    pub ridge: bool,
    pub undefined_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
}

/// A window that could not be measured, with the reason preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessPath {
    pub series: Vec<String>,
    pub bands: Vec<FrequencyBand>,
    pub records: Vec<WindowRecord>,
    pub gaps: Vec<GapRecord>,
}

impl ConnectednessPath {
    /// Long-format CSV: date, measure, band, series, value. Bootstrap rows
    /// carry corrected/lo/hi suffixes; gap rows put the reason in the value
    /// column under measure "gap".
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,measure,band,series,value")?;
        for r in &self.records {
            writeln!(w, "{},total,,,{:.6}", r.date, r.total)?;
            for b in &r.bands {
                let label = b.band.label();
                if let Some(v) = b.within {
                    writeln!(w, "{},within,{label},,{v:.6}", r.date)?;
                }
                writeln!(w, "{},frequency,{label},,{:.6}", r.date, b.frequency)?;
                for (j, name) in self.series.iter().enumerate() {
                    writeln!(w, "{},from_others,{label},{name},{:.6}", r.date, b.from_others[j])?;
                    writeln!(w, "{},to_others,{label},{name},{:.6}", r.date, b.to_others[j])?;
                    writeln!(w, "{},net,{label},{name},{:.6}", r.date, b.net[j])?;
                }
            }
            if let Some(bs) = &r.bootstrap {
                for m in &bs.measures {
                    let (measure, band) = match m.name.split_once(':') {
                        Some((kind, label)) => (kind, label),
                        None => (m.name.as_str(), ""),
                    };
                    writeln!(w, "{},{measure}_corrected,{band},,{:.6}", r.date, m.corrected)?;
                    writeln!(w, "{},{measure}_lo,{band},,{:.6}", r.date, m.lower())?;
                    writeln!(w, "{},{measure}_hi,{band},,{:.6}", r.date, m.upper())?;
                }
            }
        }
        for g in &self.gaps {
            writeln!(w, "{},gap,,,{}", g.date, g.reason.replace(',', ";"))?;
        }
        Ok(())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total).collect()
    }
}

/// Runs the pipeline over every window of the panel.
///
/// Windows are independent and run in parallel; results are reduced in
/// window order, so output does not depend on the worker count.
pub fn run_rolling(panel: &TimeSeriesPanel, cfg: &RollingConfig) -> Result<ConnectednessPath> {
    cfg.validate(panel)?;
    let w = cfg.window_length;
    let starts: Vec<usize> = (0..=panel.len() - w).step_by(cfg.step).collect();
    let outcomes: Vec<(NaiveDate, Result<WindowRecord>)> = starts
        .par_iter()
        .map(|&start| {
            let date = panel.dates()[start + w - 1];
            (date, compute_window(panel, start, date, cfg))
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut gaps = Vec::new();
    for (date, outcome) in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => gaps.push(GapRecord {
                date,
                reason: e.to_string(),
            }),
        }
    }
    Ok(ConnectednessPath {
        series: panel.names().to_vec(),
        bands: cfg.partition.bands().to_vec(),
        records,
        gaps,
    })
}

/// The measures bootstrapped per window: the total plus each band's C^F.
fn bootstrap_names(partition: &BandPartition) -> Vec<String> {
    let mut names = vec!["total".to_string()];
    for band in partition.bands() {
        names.push(format!("frequency:{}", band.label()));
    }
    names
}

fn window_measures(model: &VarModel, cfg: &RollingConfig) -> Result<Vec<f64>> {
    let sigma = if cfg.decorrelate {
        decorrelate(model.sigma())
    } else {
        model.sigma().clone()
    };
    let ma = ma_truncated(model, cfg.h)?;
    let f = gfevd(&ma, &sigma, cfg.h)?;
    let mut out = vec![total_connectedness(&f)];
    let dec = band_connectedness(&ma, &sigma, &cfg.partition)?;
    out.extend_from_slice(dec.frequency());
    Ok(out)
}

fn compute_window(
    panel: &TimeSeriesPanel,
    start: usize,
    date: NaiveDate,
    cfg: &RollingConfig,
) -> Result<WindowRecord> {
    let wpanel = panel.window(start, cfg.window_length)?;
    let model = estimate_var(&wpanel, &cfg.var_spec)?;
    let radius = model.spectral_radius();
    if radius >= 1.0 {
        return Err(Error::Unstable {
            radius,
            context: format!("window ending {date}"),
        });
    }
    let sigma = if cfg.decorrelate {
        decorrelate(model.sigma())
    } else {
        model.sigma().clone()
    };
    let ma = ma_truncated(&model, cfg.h)?;
    let f = gfevd(&ma, &sigma, cfg.h)?;
    let total = total_connectedness(&f);
    let dec = band_connectedness(&ma, &sigma, &cfg.partition)?;
    let reconstruction: f64 = dec.frequency().iter().sum();
    if (reconstruction - total).abs() > 1e-8 {
        return Err(Error::InvalidConfig(format!(
            "band measures sum to {reconstruction} but the total is {total} at {date}"
        )));
    }

    let bands = dec
        .bands()
        .iter()
        .enumerate()
        .map(|(d, band)| {
            let dir = &dec.directional_d()[d];
            BandPathEntry {
                band: band.clone(),
                within: dec.within()[d],
                frequency: dec.frequency()[d],
                from_others: dir.from_others.clone(),
                to_others: dir.to_others.clone(),
                net: dir.net.clone(),
            }
        })
        .collect();

    let bootstrap = match &cfg.bootstrap {
        Some(bcfg) => {
            // One deterministic substream per window, independent of worker
            // scheduling.
            let mut per_window = bcfg.clone();
            per_window.seed = bcfg.seed.wrapping_add(start as u64);
            let names = bootstrap_names(&cfg.partition);
            Some(bootstrap_window(&model, &per_window, &names, |m| {
                window_measures(m, cfg)
            })?)
        }
        None => None,
    };

    Ok(WindowRecord {
        date,
        total,
        bands,
        radius,
        ridge: cfg.var_spec.ridge.is_some(),
        undefined_points: dec.undefined_points(),
        bootstrap,
    })
}

/// One aligned difference row, path A minus path B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRecord {
    pub date: NaiveDate,
    pub total: f64,
    pub frequency: Vec<f64>,
    pub within: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDifference {
    pub bands: Vec<FrequencyBand>,
    pub records: Vec<DifferenceRecord>,
}

impl PathDifference {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,measure,band,value")?;
        for r in &self.records {
            writeln!(w, "{},total,,{:.6}", r.date, r.total)?;
            for (d, band) in self.bands.iter().enumerate() {
                writeln!(w, "{},frequency,{},{:.6}", r.date, band.label(), r.frequency[d])?;
                if let Some(v) = r.within[d] {
                    writeln!(w, "{},within,{},{v:.6}", r.date, band.label())?;
                }
            }
        }
        Ok(())
    }
}

/// Subtracts path B from path A on their common dates. Both paths must use
/// the same band partition; series sets may differ (the point of the
/// comparison is contrasting differently sized systems).
pub fn compare_systems(a: &ConnectednessPath, b: &ConnectednessPath) -> Result<PathDifference> {
    if a.bands != b.bands {
        return Err(Error::InvalidConfig(
            "cannot compare paths with different band partitions".to_string(),
        ));
    }
    let mut records = Vec::new();
    let mut ia = a.records.iter().peekable();
    let mut ib = b.records.iter().peekable();
    while let (Some(ra), Some(rb)) = (ia.peek(), ib.peek()) {
        match ra.date.cmp(&rb.date) {
            std::cmp::Ordering::Less => {
                ia.next();
            }
            std::cmp::Ordering::Greater => {
                ib.next();
            }
            std::cmp::Ordering::Equal => {
                let frequency = ra
                    .bands
                    .iter()
                    .zip(&rb.bands)
                    .map(|(x, y)| x.frequency - y.frequency)
                    .collect();
                let within = ra
                    .bands
                    .iter()
                    .zip(&rb.bands)
                    .map(|(x, y)| match (x.within, y.within) {
                        (Some(u), Some(v)) => Some(u - v),
                        _ => None,
                    })
                    .collect();
                records.push(DifferenceRecord {
                    date: ra.date,
                    total: ra.total - rb.total,
                    frequency,
                    within,
                });
                ia.next();
                ib.next();
            }
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidConfig(
            "paths share no dates to compare".to_string(),
        ));
    }
    Ok(PathDifference {
        bands: a.bands.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, StreamDomain};
    use crate::simulate::{generate, BivariateSpec};
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn single_band() -> BandPartition {
        BandPartition::single()
    }

    fn two_series_panel(t: usize, seed: u64) -> TimeSeriesPanel {
        let mut spec = BivariateSpec::new(0.3, 0.3, 0.1, 0.2, seed);
        spec.t = t;
        generate(&spec).unwrap()
    }

    fn fast_config() -> RollingConfig {
        let mut cfg = RollingConfig::new(single_band());
        cfg.var_spec = VarSpec::new(1, false);
        cfg.h = 16;
        cfg
    }

    #[test]
    fn exact_window_yields_one_record() {
        let panel = two_series_panel(300, 1);
        let cfg = fast_config();
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len(), 1);
        assert!(path.gaps.is_empty());
        assert_eq!(path.records[0].date, *panel.dates().last().unwrap());
    }

    #[test]
    fn full_sample_record_count() {
        let panel = two_series_panel(4216, 2);
        let cfg = fast_config();
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len() + path.gaps.len(), 3917);
        assert!(path.gaps.is_empty(), "gaps: {:?}", path.gaps.first());
    }

    #[test]
    fn step_arithmetic() {
        let panel = two_series_panel(350, 3);
        let mut cfg = fast_config();
        cfg.step = 7;
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len(), 51 / 7 + 1);
    }

    #[test]
    fn short_panel_is_a_config_error() {
        let panel = two_series_panel(200, 4);
        let cfg = fast_config();
        assert!(matches!(
            run_rolling(&panel, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn white_noise_path_stays_near_zero() {
        // Window length 1000 matches the oracle for the beta = 0 cell:
        // total mean 0.18, sd 0.16, so 0.66 is a three-sigma ceiling.
        let mut spec = BivariateSpec::new(0.0, 0.0, 0.0, 0.0, 5);
        spec.t = 1100;
        let panel = generate(&spec).unwrap();
        let mut cfg = fast_config();
        cfg.window_length = 1000;
        cfg.step = 20;
        cfg.h = 100;
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len(), 6);
        for r in &path.records {
            assert!(r.total < 0.66, "total {} at {}", r.total, r.date);
        }
    }

    #[test]
    fn per_date_reconstruction_identity() {
        let panel = two_series_panel(420, 6);
        let mut cfg = fast_config();
        cfg.partition = BandPartition::default_daily();
        cfg.h = 100;
        cfg.step = 10;
        let path = run_rolling(&panel, &cfg).unwrap();
        assert!(!path.records.is_empty());
        for r in &path.records {
            let sum: f64 = r.bands.iter().map(|b| b.frequency).sum();
            assert!(
                (sum - r.total).abs() < 1e-8,
                "identity off by {} at {}",
                sum - r.total,
                r.date
            );
            assert_eq!(r.bands.len(), 3);
            assert!(!r.ridge);
            assert!(r.radius < 1.0);
        }
    }

    #[test]
    fn deterministic_and_worker_count_invariant() {
        let panel = two_series_panel(400, 7);
        let mut cfg = fast_config();
        cfg.step = 25;
        let a = run_rolling(&panel, &cfg).unwrap();
        let b = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| run_rolling(&panel, &cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn singular_window_becomes_a_gap() {
        // Series b is constant over rows 50..400; windows fully inside that
        // stretch are exactly collinear with the intercept.
        let t = 700;
        let mut rng = derive_rng(8, StreamDomain::Fixture, 0, 0);
        let mut values = DMatrix::<f64>::zeros(t, 2);
        for r in 0..t {
            values[(r, 0)] = StandardNormal.sample(&mut rng);
            values[(r, 1)] = if (50..400).contains(&r) {
                1.0
            } else {
                StandardNormal.sample(&mut rng)
            };
        }
        let panel =
            TimeSeriesPanel::from_values(vec!["a".to_string(), "b".to_string()], values).unwrap();
        let mut cfg = RollingConfig::new(single_band());
        cfg.var_spec = VarSpec::new(1, true);
        cfg.h = 16;
        cfg.step = 50;
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len() + path.gaps.len(), 9);
        assert_eq!(path.gaps.len(), 2, "gaps: {:?}", path.gaps);
        for g in &path.gaps {
            assert!(g.reason.contains("singular"), "reason: {}", g.reason);
        }
    }

    #[test]
    fn bootstrap_attaches_bands_per_window() {
        let panel = two_series_panel(360, 9);
        let mut cfg = fast_config();
        cfg.step = 30;
        let mut b = BootstrapConfig::new(77);
        b.replications = 8;
        cfg.bootstrap = Some(b);
        let path = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path.records.len(), 3);
        for r in &path.records {
            let bs = r.bootstrap.as_ref().unwrap();
            assert_eq!(bs.measures.len(), 2);
            assert_eq!(bs.measures[0].name, "total");
            assert_eq!(bs.measures[1].name, "frequency:full");
            assert!(bs.measures[0].upper() >= bs.measures[0].lower());
        }
        // Distinct windows use distinct bootstrap substreams.
        assert_ne!(
            path.records[0].bootstrap.as_ref().unwrap().measures[0].quantiles,
            path.records[1].bootstrap.as_ref().unwrap().measures[0].quantiles
        );
        let again = run_rolling(&panel, &cfg).unwrap();
        assert_eq!(path, again);
    }

    #[test]
    fn comparison_aligns_on_common_dates() {
        let panel = two_series_panel(420, 10);
        let mut cfg = fast_config();
        cfg.step = 10;
        let path = run_rolling(&panel, &cfg).unwrap();
        let zero = compare_systems(&path, &path).unwrap();
        assert_eq!(zero.records.len(), path.records.len());
        for r in &zero.records {
            assert_eq!(r.total, 0.0);
            assert!(r.frequency.iter().all(|&v| v == 0.0));
        }

        // A second system on a shifted sample still overlaps in dates.
        let other_panel = two_series_panel(400, 11);
        let other = run_rolling(&other_panel, &cfg).unwrap();
        let diff = compare_systems(&path, &other).unwrap();
        assert!(!diff.records.is_empty());
        assert!(diff.records.len() <= path.records.len());
        let mut csv = Vec::new();
        diff.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("date,measure,band,value"));
    }

    #[test]
    fn comparison_requires_shared_dates_and_bands() {
        let panel = two_series_panel(320, 12);
        let cfg = fast_config();
        let path = run_rolling(&panel, &cfg).unwrap();
        let mut daily = fast_config();
        daily.partition = BandPartition::default_daily();
        daily.h = 100;
        let other = run_rolling(&panel, &daily).unwrap();
        assert!(matches!(
            compare_systems(&path, &other),
            Err(Error::InvalidConfig(_))
        ));

        let empty = ConnectednessPath {
            series: path.series.clone(),
            bands: path.bands.clone(),
            records: Vec::new(),
            gaps: Vec::new(),
        };
        assert!(matches!(
            compare_systems(&path, &empty),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let panel = two_series_panel(330, 13);
        let mut cfg = fast_config();
        cfg.step = 15;
        cfg.partition = BandPartition::default_daily();
        cfg.h = 100;
        let path = run_rolling(&panel, &cfg).unwrap();
        let json = serde_json::to_string(&path).unwrap();
        let back: ConnectednessPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, path);

        let mut csv = Vec::new();
        path.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("date,measure,band,series,value"));
        assert!(text.contains(",total,,,"));
        assert!(text.contains(",within,1-5:days,,"));
        assert!(text.contains(",net,5-20:days,x1,"));
    }
}
