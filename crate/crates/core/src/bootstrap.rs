//! Parametric bootstrap for connectedness measures.
//!
//! A fitted VAR is treated as the data-generating process: B panels of the
//! original window length are simulated from it (burn-in 100), each is
//! re-estimated, and the measure evaluator runs on every refit. The bias
//! estimate mean(bootstrap) - point shifts both the point estimate
//! (clamped to [0, 100]) and the quantile band ends.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;
use crate::rng::{derive_rng, StreamDomain};
use crate::var::{estimate_var, VarModel};

/// How bootstrap innovations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationMode {
    /// Multivariate normal with the fitted covariance (symmetric square root).
    Gaussian,
    /// I.i.d. resampling of centered fitted residual rows, with replacement.
    ResampleResiduals,
}

fn default_replications() -> usize {
    500
}

fn default_mode() -> InnovationMode {
    InnovationMode::ResampleResiduals
}

fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.95]
}

fn default_bias_correct() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_mode")]
    pub innovation_mode: InnovationMode,
    pub seed: u64,
    /// Quantile levels for the bands, each strictly inside (0, 1).
    /// Emitted sorted ascending.
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_bias_correct")]
    pub bias_correct: bool,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            replications: default_replications(),
            innovation_mode: default_mode(),
            seed,
            quantiles: default_quantiles(),
            bias_correct: default_bias_correct(),
        }
    }

    pub(crate) fn validate(&self) -> Result<Vec<f64>> {
        if self.replications < 2 {
            return Err(Error::InvalidConfig(format!(
                "bootstrap needs at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.quantiles.is_empty() {
            return Err(Error::InvalidConfig(
                "bootstrap quantile list is empty".to_string(),
            ));
        }
        for &q in &self.quantiles {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "quantile levels must lie strictly inside (0, 1), got {q}"
                )));
            }
        }
        let mut sorted = self.quantiles.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        Ok(sorted)
    }
}

/// One measure's bootstrap summary. All quantile values and the median are
/// shifted by the same bias as the corrected point estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMeasure {
    pub name: String,
    /// The measure evaluated on the original fit.
    pub point: f64,
    /// mean(bootstrap) - point; zero when bias correction is off.
    pub bias: f64,
    /// point - bias, clamped to [0, 100].
    pub corrected: f64,
    /// (level, shifted quantile of the bootstrap distribution).
    pub quantiles: Vec<(f64, f64)>,
    /// Shifted bootstrap median.
    pub median: f64,
}

impl BootstrapMeasure {
    /// Convenience accessors for the outermost band.
    pub fn lower(&self) -> f64 {
        self.quantiles.first().map(|&(_, v)| v).unwrap_or(f64::NAN)
    }

    pub fn upper(&self) -> f64 {
        self.quantiles.last().map(|&(_, v)| v).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub measures: Vec<BootstrapMeasure>,
    pub replications: usize,
    /// Extra draws forced by failed replications.
    pub redraws: usize,
}

const MAX_ATTEMPTS_PER_REPLICATION: u64 = 10;

/// Runs the parametric bootstrap around a fitted model.
///
/// `names` labels the entries of the evaluator's output; `evaluate` maps any
/// refit model to that fixed-length measure vector. Replications run in
/// parallel on substreams keyed by (seed, replication, attempt) and are
/// reduced in replication order, so output is independent of thread count.
pub fn bootstrap_window<F>(
    model: &VarModel,
    cfg: &BootstrapConfig,
    names: &[String],
    evaluate: F,
) -> Result<BootstrapSummary>
where
    F: Fn(&VarModel) -> Result<Vec<f64>> + Sync,
{
    let levels = cfg.validate()?;
    let radius = model.spectral_radius();
    if radius >= 1.0 {
        return Err(Error::Unstable {
            radius,
            context: "bootstrap requires a stable fitted model".to_string(),
        });
    }
    let point = evaluate(model)?;
    if point.len() != names.len() {
        return Err(Error::InvalidConfig(format!(
            "evaluator returned {} measures for {} names",
            point.len(),
            names.len()
        )));
    }

    let t = model.residuals().nrows() + model.p();
    let centered = centered_residuals(model);
    let sqrt_sigma = match cfg.innovation_mode {
        InnovationMode::Gaussian => Some(symmetric_sqrt(model.sigma())),
        InnovationMode::ResampleResiduals => None,
    };

    let draws: Vec<Result<(Vec<f64>, usize)>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            for attempt in 0..MAX_ATTEMPTS_PER_REPLICATION {
                let mut rng = derive_rng(cfg.seed, StreamDomain::Bootstrap, rep, attempt);
                let draw_innovation = |rng: &mut rand_chacha::ChaCha12Rng| -> DVector<f64> {
                    match &sqrt_sigma {
                        Some(s) => {
                            let z = DVector::from_fn(model.n(), |_, _| {
                                StandardNormal.sample(rng)
                            });
                            s * z
                        }
                        None => {
                            let row = rng.gen_range(0..centered.nrows());
                            centered.row(row).transpose()
                        }
                    }
                };
                let values = simulate_values(model, t, 100, draw_innovation, &mut rng);
                let names: Vec<String> =
                    (0..model.n()).map(|j| format!("v{j}")).collect();
                let panel = match TimeSeriesPanel::from_values(names, values) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let refit = match estimate_var(&panel, model.spec()) {
                    Ok(m) => m,
                    Err(_) => continue,
                };
                if refit.spectral_radius() >= 1.0 {
                    continue;
                }
                match evaluate(&refit) {
                    Ok(m) => return Ok((m, attempt as usize)),
                    Err(_) => continue,
                }
            }
            Err(Error::BootstrapExhausted {
                replication: rep as usize,
                attempts: MAX_ATTEMPTS_PER_REPLICATION as usize,
            })
        })
        .collect();
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    let redraws = draws.iter().map(|(_, a)| a).sum();

    let b = cfg.replications as f64;
    let measures = names
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let mut sample: Vec<f64> = draws.iter().map(|(v, _)| v[m]).collect();
            sample.sort_by(f64::total_cmp);
            let mean = sample.iter().sum::<f64>() / b;
            let bias = if cfg.bias_correct { mean - point[m] } else { 0.0 };
            let corrected = (point[m] - bias).clamp(0.0, 100.0);
            let quantiles = levels
                .iter()
                .map(|&q| (q, quantile(&sample, q) - bias))
                .collect();
            BootstrapMeasure {
                name: name.clone(),
                point: point[m],
                bias,
                corrected,
                quantiles,
                median: quantile(&sample, 0.5) - bias,
            }
        })
        .collect();
    Ok(BootstrapSummary {
        measures,
        replications: cfg.replications,
        redraws,
    })
}

/// Simulates `t` rows from the fitted process after `burn` warm-up steps.
/// Pre-sample values start at the unconditional mean, so the burn-in only
/// has to absorb innovation transients.
fn simulate_values<F>(
    model: &VarModel,
    t: usize,
    burn: usize,
    mut draw: F,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> DMatrix<f64>
where
    F: FnMut(&mut rand_chacha::ChaCha12Rng) -> DVector<f64>,
{
    let n = model.n();
    let p = model.p();
    let mean = unconditional_mean(model);
    let mut lags: Vec<DVector<f64>> = vec![mean.clone(); p];
    let mut values = DMatrix::<f64>::zeros(t, n);
    for step in 0..burn + t {
        let mut x = model.intercept().clone();
        for (l, phi) in model.phi().iter().enumerate() {
            x += phi * &lags[l];
        }
        x += draw(rng);
        lags.rotate_right(1);
        lags[0] = x.clone();
        if step >= burn {
            values.row_mut(step - burn).copy_from(&x.transpose());
        }
    }
    values
}

/// Mean of the stable process: (I - sum phi_l)^{-1} intercept.
fn unconditional_mean(model: &VarModel) -> DVector<f64> {
    let n = model.n();
    let mut a = DMatrix::<f64>::identity(n, n);
    for phi in model.phi() {
        a -= phi;
    }
    a.lu()
        .solve(model.intercept())
        .unwrap_or_else(|| DVector::zeros(n))
}

fn centered_residuals(model: &VarModel) -> DMatrix<f64> {
    let mut r = model.residuals().clone();
    let rows = r.nrows() as f64;
    for j in 0..r.ncols() {
        let mean = r.column(j).sum() / rows;
        for i in 0..r.nrows() {
            r[(i, j)] -= mean;
        }
    }
    r
}

/// Symmetric PSD square root via eigendecomposition; tiny negative
/// eigenvalues from rounding are clamped to zero.
fn symmetric_sqrt(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sigma.clone().symmetric_eigen();
    let n = sigma.nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += lambda * v[i] * v[j];
            }
        }
    }
    out
}

/// Linear-interpolation sample quantile on a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fevd::{gfevd, total_connectedness};
    use crate::simulate::{generate, BivariateSpec};
    use crate::var::{ma_truncated, VarSpec};

    fn total_evaluator(h: usize) -> impl Fn(&VarModel) -> Result<Vec<f64>> + Sync {
        move |m: &VarModel| {
            let ma = ma_truncated(m, h)?;
            let f = gfevd(&ma, m.sigma(), h)?;
            Ok(vec![total_connectedness(&f)])
        }
    }

    fn null_model(t: usize, seed: u64) -> VarModel {
        let spec = BivariateSpec::new(0.0, 0.0, 0.0, 0.0, seed);
        let mut spec = spec;
        spec.t = t;
        let panel = generate(&spec).unwrap();
        estimate_var(&panel, &VarSpec::new(1, false)).unwrap()
    }

    #[test]
    fn null_system_corrects_toward_zero() {
        let model = null_model(400, 3);
        let mut cfg = BootstrapConfig::new(17);
        cfg.replications = 80;
        let names = vec!["total".to_string()];
        let s = bootstrap_window(&model, &cfg, &names, total_evaluator(100)).unwrap();
        let m = &s.measures[0];
        assert!(m.corrected < m.point, "bias correction should shrink the null total");
        assert!(m.corrected < 2.0, "corrected total {}", m.corrected);
        assert!(m.upper() > m.lower(), "band width must be positive");
        // Median sits inside the band by construction of the quantiles.
        assert!(m.median >= m.lower() && m.median <= m.upper());
    }

    #[test]
    fn tiny_replication_count_still_works() {
        let model = null_model(300, 5);
        let mut cfg = BootstrapConfig::new(23);
        cfg.replications = 2;
        let names = vec!["total".to_string()];
        let s = bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap();
        assert!(s.measures[0].corrected < 5.0);
        assert!(s.measures[0].upper() >= s.measures[0].lower());
    }

    #[test]
    fn persistent_cell_bootstrap_mean_matches_study() {
        let spec = BivariateSpec::new(0.9, 0.9, 0.09, 0.0, 41);
        let panel = generate(&spec).unwrap();
        let model = estimate_var(&panel, &VarSpec::new(1, false)).unwrap();
        let mut cfg = BootstrapConfig::new(41);
        cfg.replications = 100;
        let names = vec!["total".to_string()];
        let s = bootstrap_window(&model, &cfg, &names, total_evaluator(1024)).unwrap();
        let m = &s.measures[0];
        // Bootstrap mean = point + bias; the study's mean for this cell is
        // 37.65 with sd 4.55, so allow two sds.
        let boot_mean = m.point + m.bias;
        assert!(
            (boot_mean - 37.65).abs() < 2.0 * 4.55,
            "bootstrap mean {boot_mean}"
        );
    }

    #[test]
    fn identical_seed_gives_identical_bands() {
        let model = null_model(300, 7);
        let mut cfg = BootstrapConfig::new(99);
        cfg.replications = 20;
        let names = vec!["total".to_string()];
        let a = bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap();
        let b = bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool
            .install(|| bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap());
        assert_eq!(a, c);
        cfg.seed = 100;
        let d = bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn widening_quantiles_never_narrows_the_band() {
        let model = null_model(300, 9);
        let mut narrow = BootstrapConfig::new(55);
        narrow.replications = 60;
        narrow.quantiles = vec![0.10, 0.90];
        let mut wide = narrow.clone();
        wide.quantiles = vec![0.05, 0.95];
        let names = vec!["total".to_string()];
        let a = bootstrap_window(&model, &narrow, &names, total_evaluator(64)).unwrap();
        let b = bootstrap_window(&model, &wide, &names, total_evaluator(64)).unwrap();
        assert!(b.measures[0].lower() <= a.measures[0].lower());
        assert!(b.measures[0].upper() >= a.measures[0].upper());
    }

    #[test]
    fn null_coverage_envelope() {
        // Sanity envelope, not exact coverage: the corrected point escapes
        // its own band in fewer than 15% of seeded null trials.
        let names = vec!["total".to_string()];
        let trials = 20;
        let mut misses = 0;
        for seed in 0..trials {
            let model = null_model(400, 1000 + seed);
            let mut cfg = BootstrapConfig::new(2000 + seed);
            cfg.replications = 50;
            let s = bootstrap_window(&model, &cfg, &names, total_evaluator(64)).unwrap();
            let m = &s.measures[0];
            if m.corrected < m.lower() || m.corrected > m.upper() {
                misses += 1;
            }
        }
        assert!(misses * 100 < 15 * trials, "{misses} misses in {trials} trials");
    }

    #[test]
    fn gaussian_mode_matches_resampling_closely() {
        let spec = BivariateSpec::new(0.5, 0.5, 0.1, 0.3, 13);
        let panel = generate(&spec).unwrap();
        let model = estimate_var(&panel, &VarSpec::new(1, false)).unwrap();
        let names = vec!["total".to_string()];
        let mut cfg = BootstrapConfig::new(31);
        cfg.replications = 60;
        let res = bootstrap_window(&model, &cfg, &names, total_evaluator(256)).unwrap();
        cfg.innovation_mode = InnovationMode::Gaussian;
        let gau = bootstrap_window(&model, &cfg, &names, total_evaluator(256)).unwrap();
        // Same DGP up to innovation shape; means agree loosely.
        let dm = (res.measures[0].point + res.measures[0].bias)
            - (gau.measures[0].point + gau.measures[0].bias);
        assert!(dm.abs() < 3.0, "mode gap {dm}");
    }

    #[test]
    fn unstable_model_is_refused() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.01, 0.0, 0.0, 0.2]);
        let model = VarModel::from_parts(vec![phi], DMatrix::identity(2, 2)).unwrap();
        let cfg = BootstrapConfig::new(1);
        let names = vec!["total".to_string()];
        let r = bootstrap_window(&model, &cfg, &names, total_evaluator(32));
        assert!(matches!(r, Err(Error::Unstable { .. })));
    }

    #[test]
    fn config_validation_rejects_bad_quantiles() {
        let model = null_model(300, 2);
        let names = vec!["total".to_string()];
        for bad in [vec![0.0, 0.9], vec![0.1, 1.0], vec![]] {
            let mut cfg = BootstrapConfig::new(1);
            cfg.quantiles = bad;
            let r = bootstrap_window(&model, &cfg, &names, total_evaluator(32));
            assert!(matches!(r, Err(Error::InvalidConfig(_))));
        }
        let mut cfg = BootstrapConfig::new(1);
        cfg.replications = 1;
        let r = bootstrap_window(&model, &cfg, &names, total_evaluator(32));
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn symmetric_sqrt_squares_back() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let s = symmetric_sqrt(&sigma);
        assert!(((&s * &s) - &sigma).amax() < 1e-12);
        assert!((s.clone() - s.transpose()).amax() < 1e-12);
    }

    #[test]
    fn quantile_interpolation_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert!((quantile(&v, 0.95) - 3.85).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }
}
