//! Frequency-band decomposition of the generalized FEVD.
//!
//! On the H-point DFT grid w_k = 2 pi k / H, the generalized causation
//! spectrum and the spectral weights are
//!
//!   f(w)[j,k]  = sigma_kk^{-1} |(psi_hat(w) Sigma)_{j,k}|^2
//!                / (psi_hat(w) Sigma psi_hat^H(w))_{j,j}
//!   Gamma_j(w) = (psi_hat(w) Sigma psi_hat^H(w))_{j,j}
//!                / sum_{w'} (psi_hat(w') Sigma psi_hat^H(w'))_{j,j}
//!
//! and the band-restricted decomposition sums Gamma_j(w) f(w) over the grid
//! indices of a band. Because the weights normalize over the same grid the
//! DFT was taken on, the full-grid sum reproduces the time-domain GFEVD
//! exactly (Parseval), so the reconstruction identities hold to rounding
//! error rather than truncation error.
//!
//! Bands are half-open angular intervals (a, b] tiling (0, pi]; each positive
//! index k also pulls in its mirror H-k (the negative frequency), and k = 0
//! belongs to the band whose lower edge is zero.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fevd::{directional_of, DirectionalSummary};
use crate::linalg::{mat_rows, rows_mat, validate_sigma};
use crate::var::MaRepresentation;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Absolute slack when snapping user-supplied band edges onto each other and
/// onto the interval ends 0 and pi. Well below any usable grid spacing.
const EDGE_TOLERANCE: f64 = 1e-6;

/// Half-open band (lower, upper] of angular frequencies, 0 <= lower < upper
/// <= pi. The zero frequency is included exactly when `lower == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrequencyBandRepr", into = "FrequencyBandRepr")]
pub struct FrequencyBand {
    lower: f64,
    upper: f64,
    label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrequencyBandRepr {
    lower: f64,
    upper: f64,
    label: String,
}

impl From<FrequencyBand> for FrequencyBandRepr {
    fn from(b: FrequencyBand) -> Self {
        Self {
            lower: b.lower,
            upper: b.upper,
            label: b.label,
        }
    }
}

impl TryFrom<FrequencyBandRepr> for FrequencyBand {
    type Error = String;

    fn try_from(r: FrequencyBandRepr) -> std::result::Result<Self, String> {
        FrequencyBand::new(r.lower, r.upper, &r.label).map_err(|e| e.to_string())
    }
}

impl FrequencyBand {
    /// Builds a band, snapping edges within `EDGE_TOLERANCE` of 0 or pi onto
    /// those values exactly.
    pub fn new(lower: f64, upper: f64, label: &str) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidBand(format!(
                "band edges must be finite, got ({lower}, {upper}]"
            )));
        }
        let lower = if lower.abs() <= EDGE_TOLERANCE {
            0.0
        } else {
            lower
        };
        let upper = if (upper - PI).abs() <= EDGE_TOLERANCE {
            PI
        } else {
            upper
        };
        if lower < 0.0 || upper > PI || lower >= upper {
            return Err(Error::InvalidBand(format!(
                "need 0 <= lower < upper <= pi, got ({lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            label: label.to_string(),
        })
    }

    /// The whole spectrum (0, pi].
    pub fn full() -> Self {
        Self {
            lower: 0.0,
            upper: PI,
            label: "full".to_string(),
        }
    }

    /// Band of cycle periods between `short_days` and `long_days` (possibly
    /// infinite), mapped through period P <-> w = 2 pi / P. Periods shorter
    /// than 2 samples clamp to the Nyquist frequency pi; an infinite long end
    /// extends the band down to w = 0.
    pub fn from_day_periods(short_days: f64, long_days: f64) -> Result<Self> {
        if !(short_days.is_finite() && short_days > 0.0) {
            return Err(Error::InvalidBand(format!(
                "short period must be positive and finite, got {short_days}"
            )));
        }
        if long_days.is_nan() || long_days <= short_days {
            return Err(Error::InvalidBand(format!(
                "long period {long_days} must exceed short period {short_days}"
            )));
        }
        let lower = if long_days.is_infinite() {
            0.0
        } else {
            TAU / long_days
        };
        let upper = (TAU / short_days).min(PI);
        let label = if long_days.is_infinite() {
            format!("{short_days}-inf:days")
        } else {
            format!("{short_days}-{long_days}:days")
        };
        Self::new(lower, upper, &label)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Ordered bands tiling (0, pi] exactly: adjacent edges are snapped onto the
/// same float so every grid index lands in exactly one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FrequencyBand>", into = "Vec<FrequencyBand>")]
pub struct BandPartition {
    bands: Vec<FrequencyBand>,
}

impl From<BandPartition> for Vec<FrequencyBand> {
    fn from(p: BandPartition) -> Self {
        p.bands
    }
}

impl TryFrom<Vec<FrequencyBand>> for BandPartition {
    type Error = String;

    fn try_from(bands: Vec<FrequencyBand>) -> std::result::Result<Self, String> {
        BandPartition::new(bands).map_err(|e| e.to_string())
    }
}

impl BandPartition {
    /// Validates and canonicalizes: sorts by lower edge, requires the first
    /// band to start at 0 and the last to end at pi, and snaps adjacent
    /// edges (within `EDGE_TOLERANCE`) onto identical floats.
    pub fn new(mut bands: Vec<FrequencyBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidPartition("no bands given".to_string()));
        }
        bands.sort_by(|a, b| a.lower.total_cmp(&b.lower));
        if bands[0].lower != 0.0 {
            return Err(Error::InvalidPartition(format!(
                "lowest band starts at {} instead of 0",
                bands[0].lower
            )));
        }
        for i in 1..bands.len() {
            let prev_upper = bands[i - 1].upper;
            let gap = bands[i].lower - prev_upper;
            if gap.abs() > EDGE_TOLERANCE {
                let kind = if gap > 0.0 { "gap" } else { "overlap" };
                return Err(Error::InvalidPartition(format!(
                    "{kind} between bands '{}' and '{}' ({} vs {})",
                    bands[i - 1].label,
                    bands[i].label,
                    prev_upper,
                    bands[i].lower
                )));
            }
            bands[i].lower = prev_upper;
            if bands[i].lower >= bands[i].upper {
                return Err(Error::InvalidPartition(format!(
                    "band '{}' collapses after edge alignment",
                    bands[i].label
                )));
            }
        }
        let last = bands.last().unwrap();
        if last.upper != PI {
            return Err(Error::InvalidPartition(format!(
                "highest band ends at {} instead of pi",
                last.upper
            )));
        }
        Ok(Self { bands })
    }

    /// The trivial partition: one band covering (0, pi].
    pub fn single() -> Self {
        Self {
            bands: vec![FrequencyBand::full()],
        }
    }

    /// The usual daily split: periods 1-5, 5-20, and 20-infinity days.
    pub fn default_daily() -> Self {
        Self::new(vec![
            FrequencyBand::from_day_periods(1.0, 5.0).expect("static band"),
            FrequencyBand::from_day_periods(5.0, 20.0).expect("static band"),
            FrequencyBand::from_day_periods(20.0, f64::INFINITY).expect("static band"),
        ])
        .expect("static partition")
    }

    /// Bands in canonical order (ascending lower edge).
    pub fn bands(&self) -> &[FrequencyBand] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

/// DFT grid indices covered by a band: every k with 1 <= k <= H/2 and
/// lower < w_k <= upper, each positive k joined by its mirror H-k, and k = 0
/// when the band's lower edge is zero. Sorted ascending.
pub fn band_indices(band: &FrequencyBand, h: usize) -> Result<Vec<usize>> {
    if h < 2 {
        return Err(Error::InvalidConfig(format!(
            "frequency grid needs H >= 2, got {h}"
        )));
    }
    let mut idx = Vec::new();
    if band.lower == 0.0 {
        idx.push(0);
    }
    let mut mirrors = Vec::new();
    for k in 1..=h / 2 {
        let w = TAU * (k as f64 / h as f64);
        if w > band.lower && w <= band.upper {
            idx.push(k);
            if h - k != k {
                mirrors.push(h - k);
            }
        }
    }
    idx.extend(mirrors);
    idx.sort_unstable();
    if idx.is_empty() {
        return Err(Error::EmptyBand {
            lower: band.lower,
            upper: band.upper,
            grid: h,
        });
    }
    Ok(idx)
}

/// The generalized causation spectrum and spectral weights on the full grid.
#[derive(Debug, Clone)]
pub struct CausationSpectrum {
    grid: Vec<f64>,
    /// f[k] is the n x n spectrum matrix at w_k; rows with zero power are
    /// left at zero and counted in `undefined_points`.
    f: Vec<DMatrix<f64>>,
    /// gamma[k][j], the power share of variable j at w_k; sums to 1 over k.
    gamma: Vec<Vec<f64>>,
    undefined_points: usize,
    max_imag_residue: f64,
}

impl CausationSpectrum {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn f(&self) -> &[DMatrix<f64>] {
        &self.f
    }

    pub fn gamma(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    pub fn h(&self) -> usize {
        self.grid.len()
    }

    pub fn n(&self) -> usize {
        self.f[0].nrows()
    }

    /// Count of (frequency, variable) points with zero spectral power,
    /// excluded from every sum.
    pub fn undefined_points(&self) -> usize {
        self.undefined_points
    }

    /// Largest imaginary part left in the (theoretically real) power terms,
    /// relative to the peak power and floored at scale 1.
    pub fn max_imag_residue(&self) -> f64 {
        self.max_imag_residue
    }
}

/// Evaluates the causation spectrum and weights from the MA frequency
/// responses. Zero-power points are excluded and counted, never skipped
/// silently.
pub fn causation_spectrum(ma: &MaRepresentation, sigma: &DMatrix<f64>) -> Result<CausationSpectrum> {
    let n = ma.n();
    let h = ma.horizon();
    if sigma.nrows() != n {
        return Err(Error::InvalidConfig(format!(
            "sigma is {}x{} but the system has {n} variables",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    validate_sigma(sigma)?;
    for k in 0..n {
        if sigma[(k, k)] <= 0.0 {
            return Err(Error::DegenerateVariance {
                index: k,
                value: sigma[(k, k)],
            });
        }
    }

    let sigma_c = sigma.map(|v| Complex64::new(v, 0.0));
    let mut f = Vec::with_capacity(h);
    let mut power = vec![vec![0.0f64; n]; h];
    let mut undefined_points = 0usize;
    let mut max_imag = 0.0f64;
    let mut max_power = 0.0f64;

    for (power_k, psi_hat) in power.iter_mut().zip(ma.psi_hat()) {
        let a = psi_hat * &sigma_c;
        let mut fk = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            // (psi_hat Sigma psi_hat^H)_{jj}, real up to rounding.
            let mut e = Complex64::new(0.0, 0.0);
            for l in 0..n {
                e += a[(j, l)] * psi_hat[(j, l)].conj();
            }
            max_imag = max_imag.max(e.im.abs());
            max_power = max_power.max(e.re.abs());
            if e.re <= 0.0 {
                undefined_points += 1;
                continue;
            }
            power_k[j] = e.re;
            for l in 0..n {
                fk[(j, l)] = a[(j, l)].norm_sqr() / (sigma[(l, l)] * e.re);
            }
        }
        f.push(fk);
    }

    let mut gamma = vec![vec![0.0f64; n]; h];
    for j in 0..n {
        let total: f64 = (0..h).map(|k| power[k][j]).sum();
        if total <= 0.0 {
            return Err(Error::DegenerateVariance {
                index: j,
                value: total,
            });
        }
        for k in 0..h {
            gamma[k][j] = power[k][j] / total;
        }
    }

    let grid = (0..h).map(|k| TAU * (k as f64 / h as f64)).collect();
    Ok(CausationSpectrum {
        grid,
        f,
        gamma,
        undefined_points,
        max_imag_residue: max_imag / max_power.max(1.0),
    })
}

/// Weighted sum of the causation spectrum over one band's grid indices:
/// theta_d[j,k] = sum_{w in band} Gamma_j(w) f(w)[j,k].
pub fn band_theta(cs: &CausationSpectrum, band: &FrequencyBand) -> Result<DMatrix<f64>> {
    let idx = band_indices(band, cs.h())?;
    Ok(accumulate_band(cs, &idx))
}

pub(crate) fn accumulate_band(cs: &CausationSpectrum, idx: &[usize]) -> DMatrix<f64> {
    let n = cs.n();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for &k in idx {
        let fk = &cs.f[k];
        for j in 0..n {
            let w = cs.gamma[k][j];
            if w == 0.0 {
                continue;
            }
            for l in 0..n {
                out[(j, l)] += w * fk[(j, l)];
            }
        }
    }
    out
}

/// Zeroes the off-diagonal of a covariance matrix; the decorrelated variant
/// of every measure reruns the pipeline on this Sigma.
pub fn decorrelate(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { sigma[(i, j)] } else { 0.0 })
}

/// Within and frequency connectedness of one band's scaled table, given the
/// sum of the full-grid scaled table. Within is undefined on a band with no
/// mass at all.
pub(crate) fn band_measures(theta_tilde_d: &DMatrix<f64>, full_sum: f64) -> (Option<f64>, f64) {
    let sum: f64 = theta_tilde_d.sum();
    let trace: f64 = theta_tilde_d.trace();
    let within = if sum > 0.0 {
        Some(100.0 * (1.0 - trace / sum))
    } else {
        None
    };
    let frequency = 100.0 * (sum - trace) / full_sum;
    (within, frequency)
}

/// Band-resolved connectedness: per-band unscaled and scaled decompositions,
/// within (C^W) and frequency (C^F) measures, and directional summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpectralDecompositionRepr", try_from = "SpectralDecompositionRepr")]
pub struct SpectralDecomposition {
    bands: Vec<FrequencyBand>,
    theta_d: Vec<DMatrix<f64>>,
    theta_tilde_d: Vec<DMatrix<f64>>,
    within: Vec<Option<f64>>,
    frequency: Vec<f64>,
    directional_d: Vec<DirectionalSummary>,
    grid_h: usize,
    undefined_points: usize,
    max_imag_residue: f64,
}

impl SpectralDecomposition {
    pub fn bands(&self) -> &[FrequencyBand] {
        &self.bands
    }

    pub fn theta_d(&self) -> &[DMatrix<f64>] {
        &self.theta_d
    }

    /// Band tables scaled by the full-grid row sums, so they add up to the
    /// time-domain theta_tilde across bands.
    pub fn theta_tilde_d(&self) -> &[DMatrix<f64>] {
        &self.theta_tilde_d
    }

    /// Within-band connectedness C^W per band; `None` on a band carrying no
    /// mass at all.
    pub fn within(&self) -> &[Option<f64>] {
        &self.within
    }

    /// Frequency connectedness C^F per band; sums to the total across a
    /// partition.
    pub fn frequency(&self) -> &[f64] {
        &self.frequency
    }

    pub fn directional_d(&self) -> &[DirectionalSummary] {
        &self.directional_d
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn undefined_points(&self) -> usize {
        self.undefined_points
    }

    pub fn max_imag_residue(&self) -> f64 {
        self.max_imag_residue
    }

    /// Sum of frequency measures, equal to total connectedness on the same
    /// grid up to rounding.
    pub fn total(&self) -> f64 {
        self.frequency.iter().sum()
    }

    /// Long-format CSV: band, from, to, value, measure. Matrix entries flow
    /// from the shock origin (`from`) to the affected variable (`to`);
    /// percent units, 6 decimals.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        writeln!(w, "band,from,to,value,measure")?;
        let n = names.len();
        for (b, band) in self.bands.iter().enumerate() {
            let label = band.label();
            match self.within[b] {
                Some(v) => writeln!(w, "{label},,,{v:.6},within")?,
                None => writeln!(w, "{label},,,,within")?,
            }
            writeln!(w, "{label},,,{:.6},frequency", self.frequency[b])?;
            let tt = &self.theta_tilde_d[b];
            let d = &self.directional_d[b];
            for j in 0..n {
                for k in 0..n {
                    writeln!(
                        w,
                        "{label},{},{},{:.6},theta_tilde",
                        names[k],
                        names[j],
                        100.0 * tt[(j, k)]
                    )?;
                }
            }
            for (j, name) in names.iter().enumerate().take(n) {
                writeln!(
                    w,
                    "{label},others,{name},{:.6},from_others",
                    d.from_others[j]
                )?;
                writeln!(w, "{label},{name},others,{:.6},to_others", d.to_others[j])?;
                writeln!(w, "{label},{name},others,{:.6},net", d.net[j])?;
            }
            for j in 0..n {
                for k in 0..n {
                    writeln!(
                        w,
                        "{label},{},{},{:.6},pairwise_net",
                        names[j], names[k], d.pairwise_net[j][k]
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BandEntryRepr {
    band: FrequencyBand,
    theta: Vec<Vec<f64>>,
    theta_tilde: Vec<Vec<f64>>,
    within: Option<f64>,
    frequency: f64,
    directional: DirectionalSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectralDecompositionRepr {
    grid_h: usize,
    undefined_points: usize,
    max_imag_residue: f64,
    bands: Vec<BandEntryRepr>,
}

impl From<SpectralDecomposition> for SpectralDecompositionRepr {
    fn from(s: SpectralDecomposition) -> Self {
        let bands = s
            .bands
            .into_iter()
            .enumerate()
            .map(|(i, band)| BandEntryRepr {
                band,
                theta: mat_rows(&s.theta_d[i]),
                theta_tilde: mat_rows(&s.theta_tilde_d[i]),
                within: s.within[i],
                frequency: s.frequency[i],
                directional: s.directional_d[i].clone(),
            })
            .collect();
        Self {
            grid_h: s.grid_h,
            undefined_points: s.undefined_points,
            max_imag_residue: s.max_imag_residue,
            bands,
        }
    }
}

impl TryFrom<SpectralDecompositionRepr> for SpectralDecomposition {
    type Error = String;

    fn try_from(r: SpectralDecompositionRepr) -> std::result::Result<Self, String> {
        let mut bands = Vec::new();
        let mut theta_d = Vec::new();
        let mut theta_tilde_d = Vec::new();
        let mut within = Vec::new();
        let mut frequency = Vec::new();
        let mut directional_d = Vec::new();
        for e in r.bands {
            bands.push(e.band);
            theta_d.push(rows_mat(&e.theta, 0)?);
            theta_tilde_d.push(rows_mat(&e.theta_tilde, 0)?);
            within.push(e.within);
            frequency.push(e.frequency);
            directional_d.push(e.directional);
        }
        Ok(Self {
            bands,
            theta_d,
            theta_tilde_d,
            within,
            frequency,
            directional_d,
            grid_h: r.grid_h,
            undefined_points: r.undefined_points,
            max_imag_residue: r.max_imag_residue,
        })
    }
}

/// Full band-resolved decomposition from MA frequency responses and a
/// partition of (0, pi].
pub fn band_connectedness(
    ma: &MaRepresentation,
    sigma: &DMatrix<f64>,
    partition: &BandPartition,
) -> Result<SpectralDecomposition> {
    let cs = causation_spectrum(ma, sigma)?;
    band_connectedness_from_spectrum(&cs, partition)
}

/// Same, reusing an already-computed causation spectrum.
pub fn band_connectedness_from_spectrum(
    cs: &CausationSpectrum,
    partition: &BandPartition,
) -> Result<SpectralDecomposition> {
    let n = cs.n();
    let h = cs.h();
    let theta_d: Vec<DMatrix<f64>> = partition
        .bands()
        .iter()
        .map(|band| band_indices(band, h).map(|idx| accumulate_band(cs, &idx)))
        .collect::<Result<_>>()?;

    // Scale every band by the row sums of the full-grid decomposition so the
    // scaled bands add back to theta_tilde.
    let mut theta_full = DMatrix::<f64>::zeros(n, n);
    for t in &theta_d {
        theta_full += t;
    }
    let row_sums: Vec<f64> = (0..n).map(|j| theta_full.row(j).sum()).collect();
    for (j, &sum) in row_sums.iter().enumerate() {
        if sum <= 0.0 {
            return Err(Error::DegenerateVariance {
                index: j,
                value: sum,
            });
        }
    }
    let theta_tilde_d: Vec<DMatrix<f64>> = theta_d
        .iter()
        .map(|t| DMatrix::from_fn(n, n, |j, k| t[(j, k)] / row_sums[j]))
        .collect();

    let full_sum: f64 = theta_tilde_d.iter().map(|t| t.sum()).sum();
    let mut within = Vec::with_capacity(partition.len());
    let mut frequency = Vec::with_capacity(partition.len());
    let mut directional_d = Vec::with_capacity(partition.len());
    for tt in &theta_tilde_d {
        let (w, f) = band_measures(tt, full_sum);
        within.push(w);
        frequency.push(f);
        directional_d.push(directional_of(tt));
    }

    Ok(SpectralDecomposition {
        bands: partition.bands().to_vec(),
        theta_d,
        theta_tilde_d,
        within,
        frequency,
        directional_d,
        grid_h: h,
        undefined_points: cs.undefined_points(),
        max_imag_residue: cs.max_imag_residue(),
    })
}
