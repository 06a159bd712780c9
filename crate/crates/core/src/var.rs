//! VAR(p) estimation and the truncated moving-average representation.
//!
//! Estimation is per-equation OLS on the lagged design matrix, solved through
//! a QR decomposition for numerical stability; the explicit normal-equations
//! solve exists only as a test oracle. The residual covariance applies the
//! degrees-of-freedom correction z = n*p + 1{intercept}:
//!
//!   sigma = eps' eps / (T_eff - z),   T_eff = T - p
//!
//! The MA representation truncates at horizon H:
//!
//!   psi_0 = I,  psi_h = sum_{j=1..min(h,p)} phi_j psi_{h-j}
//!
//! and its frequency responses psi_hat(w_k) = sum_h psi_h e^{-2 pi i k h / H}
//! are taken on the H-point DFT grid w_k = 2 pi k / H.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_rows, rows_mat, validate_sigma};
use crate::panel::TimeSeriesPanel;

/// Estimation specification: lag order, intercept, optional ridge term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    /// Lag order p >= 1.
    pub p: usize,
    /// Include a constant regressor in every equation.
    pub include_intercept: bool,
    /// Optional ridge penalty lambda added as lambda*I to the regressor
    /// cross-product; off by default, for pathological windows only. Always
    /// report its use in output metadata.
    #[serde(default)]
    pub ridge: Option<f64>,
}

impl VarSpec {
    pub fn new(p: usize, include_intercept: bool) -> Self {
        Self {
            p,
            include_intercept,
            ridge: None,
        }
    }
}

impl Default for VarSpec {
    /// The empirical workhorse: VAR(2) with a constant.
    fn default() -> Self {
        Self::new(2, true)
    }
}

/// Estimated (or externally supplied) VAR(p) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VarModelRepr", try_from = "VarModelRepr")]
pub struct VarModel {
    spec: VarSpec,
    phi: Vec<DMatrix<f64>>,
    intercept: DVector<f64>,
    residuals: DMatrix<f64>,
    sigma: DMatrix<f64>,
    z: usize,
}

impl VarModel {
    /// Wraps known coefficients as a population model: no intercept, no
    /// residuals, no dof correction. `sigma` must be symmetric PSD.
    pub fn from_parts(phi: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::InvalidConfig("need at least one lag matrix".into()));
        }
        validate_sigma(&sigma)?;
        let n = sigma.nrows();
        for (l, m) in phi.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidConfig(format!(
                    "phi[{}] is {}x{}, expected {n}x{n}",
                    l + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let p = phi.len();
        Ok(Self {
            spec: VarSpec::new(p, false),
            phi,
            intercept: DVector::zeros(n),
            residuals: DMatrix::zeros(0, n),
            sigma,
            z: 0,
        })
    }

    pub fn spec(&self) -> &VarSpec {
        &self.spec
    }

    /// Coefficient matrices phi_1..phi_p.
    pub fn phi(&self) -> &[DMatrix<f64>] {
        &self.phi
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Degrees-of-freedom correction: regressors per equation.
    pub fn z(&self) -> usize {
        self.z
    }

    /// System dimension n.
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    /// Largest eigenvalue modulus of the companion matrix. Values >= 1 mean
    /// the VAR is nonstationary; the caller decides whether to warn or abort.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.n();
        let p = self.p();
        let mut companion = DMatrix::zeros(n * p, n * p);
        for (l, m) in self.phi.iter().enumerate() {
            companion.view_mut((0, l * n), (n, n)).copy_from(m);
        }
        for i in n..n * p {
            companion[(i, i - n)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }
}

/// Row-major JSON image of a model; float text is shortest round-trip, so
/// serialization is a bit-exact reproducibility audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct VarModelRepr {
    spec: VarSpec,
    phi: Vec<Vec<Vec<f64>>>,
    intercept: Vec<f64>,
    residuals: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    z: usize,
}

impl From<VarModel> for VarModelRepr {
    fn from(m: VarModel) -> Self {
        Self {
            spec: m.spec,
            phi: m.phi.iter().map(mat_rows).collect(),
            intercept: m.intercept.iter().copied().collect(),
            residuals: mat_rows(&m.residuals),
            sigma: mat_rows(&m.sigma),
            z: m.z,
        }
    }
}

impl TryFrom<VarModelRepr> for VarModel {
    type Error = String;

    fn try_from(r: VarModelRepr) -> std::result::Result<Self, String> {
        let n = r.sigma.len();
        let sigma = rows_mat(&r.sigma, n)?;
        if sigma.nrows() != sigma.ncols() {
            return Err("sigma must be square".to_string());
        }
        if r.phi.len() != r.spec.p {
            return Err(format!("{} phi matrices but p={}", r.phi.len(), r.spec.p));
        }
        let phi = r
            .phi
            .iter()
            .map(|m| {
                let m = rows_mat(m, n)?;
                if m.nrows() != n || m.ncols() != n {
                    return Err("phi dimension mismatch".to_string());
                }
                Ok(m)
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        if r.intercept.len() != n {
            return Err("intercept length mismatch".to_string());
        }
        let residuals = rows_mat(&r.residuals, n)?;
        if residuals.nrows() > 0 && residuals.ncols() != n {
            return Err("residual width mismatch".to_string());
        }
        Ok(Self {
            spec: r.spec,
            phi,
            intercept: DVector::from_vec(r.intercept),
            residuals,
            sigma,
            z: r.z,
        })
    }
}

/// Truncated MA representation and its DFT on the H-point frequency grid.
#[derive(Debug, Clone)]
pub struct MaRepresentation {
    psi: Vec<DMatrix<f64>>,
    psi_hat: Vec<DMatrix<Complex64>>,
}

impl MaRepresentation {
    /// Truncation horizon H (number of MA terms and grid points).
    pub fn horizon(&self) -> usize {
        self.psi.len()
    }

    pub fn n(&self) -> usize {
        self.psi[0].nrows()
    }

    /// MA coefficients psi_0..psi_{H-1}.
    pub fn psi(&self) -> &[DMatrix<f64>] {
        &self.psi
    }

    /// Frequency responses psi_hat(w_k), k = 0..H-1, w_k = 2 pi k / H.
    pub fn psi_hat(&self) -> &[DMatrix<Complex64>] {
        &self.psi_hat
    }
}

/// The MA recursion, shared by `ma_truncated` and `msfe_convergence`.
fn ma_coefficients(phi: &[DMatrix<f64>], n: usize, count: usize) -> Vec<DMatrix<f64>> {
    let p = phi.len();
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(count);
    psi.push(DMatrix::identity(n, n));
    for h in 1..count {
        let mut acc = DMatrix::zeros(n, n);
        for j in 1..=h.min(p) {
            acc += &phi[j - 1] * &psi[h - j];
        }
        psi.push(acc);
    }
    psi
}

/// Builds the truncated MA representation with H terms and its H-point DFT.
pub fn ma_truncated(model: &VarModel, h: usize) -> Result<MaRepresentation> {
    if h == 0 {
        return Err(Error::InvalidConfig("horizon H must be >= 1".into()));
    }
    let n = model.n();
    let psi = ma_coefficients(model.phi(), n, h);

    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(h);
    let mut psi_hat = vec![DMatrix::from_element(n, n, Complex64::new(0.0, 0.0)); h];
    let mut buf = vec![Complex64::new(0.0, 0.0); h];
    for i in 0..n {
        for j in 0..n {
            for (t, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(psi[t][(i, j)], 0.0);
            }
            fft.process(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                psi_hat[k][(i, j)] = *v;
            }
        }
    }
    Ok(MaRepresentation { psi, psi_hat })
}

/// Per-variable horizon at which the forecast-error-variance increment
/// diag(psi_m sigma psi_m') drops below `eps`, searching m = 1..=H.
/// `None` marks a variable whose increments never fall below eps (typical
/// for nonstationary systems).
pub fn msfe_convergence(model: &VarModel, h: usize, eps: f64) -> Result<Vec<Option<usize>>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    if h == 0 {
        return Err(Error::InvalidConfig("horizon H must be >= 1".into()));
    }
    let n = model.n();
    let psi = ma_coefficients(model.phi(), n, h + 1);
    let mut reached: Vec<Option<usize>> = vec![None; n];
    for (m, psi_m) in psi.iter().enumerate().skip(1) {
        if reached.iter().all(Option::is_some) {
            break;
        }
        let prod = psi_m * model.sigma() * psi_m.transpose();
        for j in 0..n {
            if reached[j].is_none() && prod[(j, j)] < eps {
                reached[j] = Some(m);
            }
        }
    }
    Ok(reached)
}

/// Estimates a VAR(p) by per-equation OLS via QR on the lagged design.
///
/// Fails with `NotEnoughData` when T - p <= n*p + 1{intercept} and with
/// `SingularDesign` when the design loses column rank (unless a ridge term
/// is configured, which augments the design with sqrt(lambda)*I rows).
pub fn estimate_var(panel: &TimeSeriesPanel, spec: &VarSpec) -> Result<VarModel> {
    if spec.p == 0 {
        return Err(Error::InvalidConfig("lag order p must be >= 1".into()));
    }
    if let Some(lambda) = spec.ridge {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ridge lambda must be positive and finite, got {lambda}"
            )));
        }
    }
    let t = panel.len();
    let n = panel.width();
    let p = spec.p;
    let z = n * p + usize::from(spec.include_intercept);
    if t <= p || t - p <= z {
        return Err(Error::NotEnoughData { t, n, p });
    }
    let t_eff = t - p;
    let v = panel.values();

    let icpt = usize::from(spec.include_intercept);
    let mut x = DMatrix::zeros(t_eff, z);
    let mut y = DMatrix::zeros(t_eff, n);
    for r in 0..t_eff {
        let time = r + p;
        if spec.include_intercept {
            x[(r, 0)] = 1.0;
        }
        for l in 1..=p {
            for k in 0..n {
                x[(r, icpt + (l - 1) * n + k)] = v[(time - l, k)];
            }
        }
        for j in 0..n {
            y[(r, j)] = v[(time, j)];
        }
    }

    // Ridge augments the design with sqrt(lambda)*I rows (and zero targets),
    // which solves (X'X + lambda I) B = X'Y through the same QR path. The
    // penalty covers every regressor, intercept included.
    let beta = match spec.ridge {
        None => solve_ls(&x, &y)?,
        Some(lambda) => {
            let mut xa = DMatrix::zeros(t_eff + z, z);
            xa.view_mut((0, 0), (t_eff, z)).copy_from(&x);
            for i in 0..z {
                xa[(t_eff + i, i)] = lambda.sqrt();
            }
            let mut ya = DMatrix::zeros(t_eff + z, n);
            ya.view_mut((0, 0), (t_eff, n)).copy_from(&y);
            solve_ls(&xa, &ya)?
        }
    };

    let residuals = &y - &x * &beta;
    let sigma = residuals.transpose() * &residuals / (t_eff - z) as f64;

    let intercept = if spec.include_intercept {
        beta.row(0).transpose()
    } else {
        DVector::zeros(n)
    };
    let mut phi = Vec::with_capacity(p);
    for l in 1..=p {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                m[(j, k)] = beta[(icpt + (l - 1) * n + k, j)];
            }
        }
        phi.push(m);
    }

    Ok(VarModel {
        spec: *spec,
        phi,
        intercept,
        residuals,
        sigma,
        z,
    })
}

/// Least-squares solve via thin QR; reports a condition estimate from the
/// diagonal of R when the design is rank deficient.
fn solve_ls(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    let rd: Vec<f64> = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .collect();
    let rmax = rd.iter().copied().fold(0.0, f64::max);
    let rmin = rd.iter().copied().fold(f64::INFINITY, f64::min);
    if rmin <= rmax * 1e-12 {
        let condition = if rmin > 0.0 {
            rmax / rmin
        } else {
            f64::INFINITY
        };
        return Err(Error::SingularDesign { condition });
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign {
            condition: f64::INFINITY,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Simulates x_t = c + phi x_{t-1} + L eta_t with standard normal eta.
    fn simulate_var1(
        phi: &DMatrix<f64>,
        chol_l: &DMatrix<f64>,
        c: &DVector<f64>,
        t: usize,
        burn: usize,
        seed: u64,
    ) -> TimeSeriesPanel {
        let n = phi.nrows();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut x = DVector::<f64>::zeros(n);
        let mut values = DMatrix::zeros(t, n);
        for step in 0..burn + t {
            let eta = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            x = c + phi * &x + chol_l * eta;
            if step >= burn {
                let r = step - burn;
                for j in 0..n {
                    values[(r, j)] = x[j];
                }
            }
        }
        let names = (0..n).map(|j| format!("s{j}")).collect();
        TimeSeriesPanel::from_values(names, values).unwrap()
    }

    fn white_noise_panel(t: usize, n: usize, seed: u64) -> TimeSeriesPanel {
        simulate_var1(
            &DMatrix::zeros(n, n),
            &DMatrix::identity(n, n),
            &DVector::zeros(n),
            t,
            0,
            seed,
        )
    }

    #[test]
    fn dof_correction_matches_spec_counts() {
        let panel = white_noise_panel(300, 11, 11);
        let model = estimate_var(&panel, &VarSpec::new(2, true)).unwrap();
        assert_eq!(model.z(), 23);
        assert_eq!(model.residuals().nrows(), 298);
        assert_eq!(model.p(), 2);
        assert_eq!(model.n(), 11);
    }

    #[test]
    fn white_noise_coefficients_are_small() {
        let panel = white_noise_panel(1000, 2, 42);
        let model = estimate_var(&panel, &VarSpec::new(1, false)).unwrap();
        let bound = 4.0 / (1000f64).sqrt();
        for v in model.phi()[0].iter() {
            assert!(v.abs() < bound, "coefficient {v} above {bound}");
        }
    }

    #[test]
    fn sigma_is_residual_cross_product_over_dof() {
        let panel = white_noise_panel(400, 3, 5);
        let model = estimate_var(&panel, &VarSpec::new(2, true)).unwrap();
        assert_eq!(model.z(), 7);
        let eps = model.residuals();
        // T_eff = 398, z = 7 for n=3, p=2 with intercept.
        let expected = eps.transpose() * eps / 391.0;
        assert_relative_eq!(model.sigma(), &expected, epsilon = 1e-13);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(model.sigma()[(i, j)], model.sigma()[(j, i)]);
            }
        }
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let panel = simulate_var1(
            &DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]),
            &DMatrix::identity(2, 2),
            &DVector::from_vec(vec![1.0, -0.5]),
            600,
            50,
            9,
        );
        let spec = VarSpec::new(1, true);
        let model = estimate_var(&panel, &spec).unwrap();
        // Rebuild the design exactly as the estimator lays it out.
        let v = panel.values();
        let t_eff = panel.len() - 1;
        let mut x = DMatrix::zeros(t_eff, 3);
        for r in 0..t_eff {
            x[(r, 0)] = 1.0;
            x[(r, 1)] = v[(r, 0)];
            x[(r, 2)] = v[(r, 1)];
        }
        let cross = x.transpose() * model.residuals();
        let scale = x.amax() * model.residuals().amax();
        assert!(cross.amax() / scale < 1e-8, "max |X'e| = {}", cross.amax());
    }

    #[test]
    fn qr_matches_normal_equations_oracle() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.9, 0.09, 0.09, 0.9]);
        let panel = simulate_var1(
            &phi,
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
            1000,
            100,
            1234,
        );
        let model = estimate_var(&panel, &VarSpec::new(1, false)).unwrap();

        // Oracle: scalar-loop normal equations on the same design.
        let v = panel.values();
        let t_eff = panel.len() - 1;
        let mut x = DMatrix::zeros(t_eff, 2);
        let mut y = DMatrix::zeros(t_eff, 2);
        for r in 0..t_eff {
            for k in 0..2 {
                x[(r, k)] = v[(r, k)];
                y[(r, k)] = v[(r + 1, k)];
            }
        }
        let xtx = x.transpose() * &x;
        let beta = xtx.try_inverse().unwrap() * x.transpose() * &y;
        for j in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(model.phi()[0][(j, k)], beta[(k, j)], epsilon = 1e-8);
            }
        }

        // And the estimate lands within 3 standard errors of the truth.
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let se = (model.sigma()[(j, j)] * xtx_inv[(k, k)]).sqrt();
                let dev = (model.phi()[0][(j, k)] - phi[(j, k)]).abs();
                assert!(dev < 3.0 * se, "phi[{j},{k}] off by {dev} > 3se={}", 3.0 * se);
            }
        }
    }

    #[test]
    fn intercept_is_recovered() {
        let phi = DMatrix::from_row_slice(1, 1, &[0.5]);
        let panel = simulate_var1(
            &phi,
            &DMatrix::identity(1, 1),
            &DVector::from_vec(vec![2.0]),
            4000,
            200,
            7,
        );
        let model = estimate_var(&panel, &VarSpec::new(1, true)).unwrap();
        assert!((model.intercept()[0] - 2.0).abs() < 0.2);
        assert!((model.phi()[0][(0, 0)] - 0.5).abs() < 0.1);
    }

    #[test]
    fn estimator_is_consistent_at_large_t() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.9, 0.09, 0.09, 0.9]);
        let panel = simulate_var1(
            &phi,
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
            100_000,
            500,
            2024,
        );
        let model = estimate_var(&panel, &VarSpec::new(1, false)).unwrap();
        let dev = (model.phi()[0].clone() - phi).amax();
        assert!(dev < 0.01, "max deviation {dev}");
    }

    #[test]
    fn not_enough_data_is_reported() {
        let panel = white_noise_panel(10, 2, 3);
        match estimate_var(&panel, &VarSpec::new(3, true)) {
            Err(Error::NotEnoughData { t, n, p }) => assert_eq!((t, n, p), (10, 2, 3)),
            other => panic!("expected NotEnoughData, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_column_is_singular_unless_ridged() {
        let base = white_noise_panel(200, 1, 17);
        let mut values = DMatrix::zeros(200, 2);
        for r in 0..200 {
            values[(r, 0)] = base.values()[(r, 0)];
            values[(r, 1)] = base.values()[(r, 0)];
        }
        let panel = TimeSeriesPanel::from_values(vec!["a".into(), "b".into()], values).unwrap();
        match estimate_var(&panel, &VarSpec::new(1, false)) {
            Err(Error::SingularDesign { condition }) => assert!(condition > 1e12),
            other => panic!("expected SingularDesign, got {other:?}"),
        }
        let ridged = VarSpec {
            ridge: Some(1e-4),
            ..VarSpec::new(1, false)
        };
        let model = estimate_var(&panel, &ridged).unwrap();

        // Oracle: (X'X + lambda I)^{-1} X'Y.
        let v = panel.values();
        let mut x = DMatrix::zeros(199, 2);
        let mut y = DMatrix::zeros(199, 2);
        for r in 0..199 {
            for k in 0..2 {
                x[(r, k)] = v[(r, k)];
                y[(r, k)] = v[(r + 1, k)];
            }
        }
        let reg = x.transpose() * &x + DMatrix::identity(2, 2) * 1e-4;
        let beta = reg.try_inverse().unwrap() * x.transpose() * &y;
        for j in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(model.phi()[0][(j, k)], beta[(k, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let zero = VarModel::from_parts(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(zero.spectral_radius(), 0.0);

        let twin = VarModel::from_parts(
            vec![DMatrix::from_row_slice(2, 2, &[0.9, 0.09, 0.09, 0.9])],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_relative_eq!(twin.spectral_radius(), 0.99, epsilon = 1e-10);

        let unit = VarModel::from_parts(
            vec![DMatrix::from_row_slice(1, 1, &[1.0])],
            DMatrix::identity(1, 1),
        )
        .unwrap();
        assert_relative_eq!(unit.spectral_radius(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn companion_radius_covers_higher_lags() {
        // x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: companion eigenvalues solve
        // r^2 = 0.5 r + 0.3, largest root (0.5 + sqrt(0.25 + 1.2)) / 2.
        let model = VarModel::from_parts(
            vec![
                DMatrix::from_row_slice(1, 1, &[0.5]),
                DMatrix::from_row_slice(1, 1, &[0.3]),
            ],
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let expected = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert_relative_eq!(model.spectral_radius(), expected, epsilon = 1e-12);
    }

    #[test]
    fn ma_matches_matrix_powers_for_var1() {
        let a = DMatrix::from_row_slice(2, 2, &[0.6, -0.2, 0.3, 0.1]);
        let model = VarModel::from_parts(vec![a.clone()], DMatrix::identity(2, 2)).unwrap();
        let ma = ma_truncated(&model, 16).unwrap();
        assert_eq!(ma.psi()[0], DMatrix::identity(2, 2));
        let mut power = DMatrix::identity(2, 2);
        for h in 0..16 {
            assert!((ma.psi()[h].clone() - &power).amax() < 1e-10, "h={h}");
            power = &a * power;
        }
    }

    #[test]
    fn ma_recursion_handles_var2() {
        let phi1 = DMatrix::from_row_slice(1, 1, &[0.5]);
        let phi2 = DMatrix::from_row_slice(1, 1, &[0.2]);
        let model =
            VarModel::from_parts(vec![phi1, phi2], DMatrix::identity(1, 1)).unwrap();
        let ma = ma_truncated(&model, 5).unwrap();
        // psi: 1, 0.5, 0.45, 0.325, 0.2525 by hand.
        let expected = [1.0, 0.5, 0.45, 0.325, 0.2525];
        for (h, e) in expected.iter().enumerate() {
            assert_relative_eq!(ma.psi()[h][(0, 0)], *e, epsilon = 1e-14);
        }
    }

    #[test]
    fn dft_at_zero_is_geometric_sum() {
        let model = VarModel::from_parts(
            vec![DMatrix::from_row_slice(1, 1, &[0.5])],
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let ma = ma_truncated(&model, 4).unwrap();
        let at_zero = ma.psi_hat()[0][(0, 0)];
        assert_relative_eq!(at_zero.re, 1.875, epsilon = 1e-12);
        assert_relative_eq!(at_zero.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dft_has_conjugate_symmetry_and_inverts() {
        let a = DMatrix::from_row_slice(2, 2, &[0.4, 0.25, -0.3, 0.5]);
        let model = VarModel::from_parts(vec![a], DMatrix::identity(2, 2)).unwrap();
        let h = 12;
        let ma = ma_truncated(&model, h).unwrap();
        for k in 1..h {
            let diff = (ma.psi_hat()[h - k].map(|c| c.conj()) - &ma.psi_hat()[k]).map(|c| c.norm());
            assert!(diff.max() < 1e-10, "k={k}");
        }
        // Inverse DFT recovers each psi_h.
        for t in 0..h {
            let mut acc = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
            for k in 0..h {
                let w = Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (k as f64) * (t as f64) / h as f64,
                );
                acc += ma.psi_hat()[k].map(|c| c * w);
            }
            acc /= Complex64::new(h as f64, 0.0);
            let diff = (acc.map(|c| c.re) - &ma.psi()[t]).amax();
            let imag = acc.map(|c| c.im.abs()).max();
            assert!(diff < 1e-10 && imag < 1e-10, "t={t}");
        }
    }

    #[test]
    fn msfe_examples() {
        let still = VarModel::from_parts(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(
            msfe_convergence(&still, 10, 0.5).unwrap(),
            vec![Some(1), Some(1)]
        );

        // Increment at lag m for this symmetric pair is
        // (0.99^(2m) + 0.81^(2m)) / 2; first below 1e-6 at m = 653.
        let twin = VarModel::from_parts(
            vec![DMatrix::from_row_slice(2, 2, &[0.9, 0.09, 0.09, 0.9])],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let got = msfe_convergence(&twin, 1000, 1e-6).unwrap();
        assert_eq!(got, vec![Some(653), Some(653)]);
        assert!(matches!(got[0], Some(m) if m > 100));

        let unit = VarModel::from_parts(
            vec![DMatrix::from_row_slice(1, 1, &[1.0])],
            DMatrix::identity(1, 1),
        )
        .unwrap();
        assert_eq!(msfe_convergence(&unit, 500, 1e-6).unwrap(), vec![None]);
    }

    #[test]
    fn model_json_round_trips_bitwise() {
        let panel = white_noise_panel(120, 2, 55);
        let model = estimate_var(&panel, &VarSpec::new(2, true)).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: VarModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn from_parts_rejects_bad_sigma() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(VarModel::from_parts(vec![DMatrix::zeros(2, 2)], asym).is_err());
        let negdef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(VarModel::from_parts(vec![DMatrix::zeros(2, 2)], negdef).is_err());
    }
}
