//! Generalized forecast-error variance decomposition at horizon H and the
//! connectedness measures built on it.
//!
//! The unscaled decomposition attributes the H-step forecast-error variance
//! of variable j to shocks in variable k:
//!
//!   theta[j,k] = sigma_kk^{-1} sum_{h<H} ((psi_h Sigma)_{j,k})^2
//!                / sum_{h<H} (psi_h Sigma psi_h')_{j,j}
//!
//! Rows of the scaled form theta_tilde sum to one, and total connectedness is
//! the off-diagonal share of the whole table, in percent. Everything the
//! frequency-band decomposition produces must reconcile with these numbers on
//! the same (psi, Sigma, H) inputs.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_rows, rows_mat, validate_sigma};
use crate::var::MaRepresentation;

/// Unscaled and row-standardized GFEVD at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FevdMatrixRepr", try_from = "FevdMatrixRepr")]
pub struct FevdMatrix {
    horizon: usize,
    theta: DMatrix<f64>,
    theta_tilde: DMatrix<f64>,
}

impl FevdMatrix {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Unscaled decomposition; entries are nonnegative variance shares
    /// before row standardization.
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// Row-standardized decomposition; every row sums to 1.
    pub fn theta_tilde(&self) -> &DMatrix<f64> {
        &self.theta_tilde
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    /// Writes the standardized table as CSV in percent, 6 decimal places.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "series")?;
        for name in names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (j, name) in names.iter().enumerate().take(self.n()) {
            write!(w, "{name}")?;
            for k in 0..self.n() {
                write!(w, ",{:.6}", 100.0 * self.theta_tilde[(j, k)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn from_raw(horizon: usize, theta: DMatrix<f64>, theta_tilde: DMatrix<f64>) -> Self {
        Self {
            horizon,
            theta,
            theta_tilde,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FevdMatrixRepr {
    horizon: usize,
    theta: Vec<Vec<f64>>,
    theta_tilde: Vec<Vec<f64>>,
}

impl From<FevdMatrix> for FevdMatrixRepr {
    fn from(f: FevdMatrix) -> Self {
        Self {
            horizon: f.horizon,
            theta: mat_rows(&f.theta),
            theta_tilde: mat_rows(&f.theta_tilde),
        }
    }
}

impl TryFrom<FevdMatrixRepr> for FevdMatrix {
    type Error = String;

    fn try_from(r: FevdMatrixRepr) -> std::result::Result<Self, String> {
        let theta = rows_mat(&r.theta, 0)?;
        let theta_tilde = rows_mat(&r.theta_tilde, 0)?;
        if theta.shape() != theta_tilde.shape() || theta.nrows() != theta.ncols() {
            return Err("decomposition matrices must be square and same-shaped".into());
        }
        Ok(Self {
            horizon: r.horizon,
            theta,
            theta_tilde,
        })
    }
}

/// Directional connectedness in percent: received, transmitted, net, and
/// pairwise net flows, plus the total index (the mean of `from_others`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalSummary {
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub net: Vec<f64>,
    /// pairwise_net[j][k] = 100 * (theta_tilde[k,j] - theta_tilde[j,k]),
    /// variable j's net transmission to variable k; antisymmetric.
    pub pairwise_net: Vec<Vec<f64>>,
    pub total: f64,
}

impl DirectionalSummary {
    /// Writes per-series directional measures as CSV, 6 decimal places, with
    /// a trailing TOTAL row.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        writeln!(w, "series,from_others,to_others,net")?;
        for (j, name) in names.iter().enumerate() {
            writeln!(
                w,
                "{name},{:.6},{:.6},{:.6}",
                self.from_others[j], self.to_others[j], self.net[j]
            )?;
        }
        writeln!(w, "TOTAL,{:.6},,", self.total)
    }
}

/// Computes the generalized FEVD from a truncated MA representation.
///
/// `h` counts forecast steps and may not exceed the MA truncation; the sums
/// above run over psi_0..psi_{h-1}.
pub fn gfevd(ma: &MaRepresentation, sigma: &DMatrix<f64>, h: usize) -> Result<FevdMatrix> {
    if h == 0 {
        return Err(Error::InvalidConfig("horizon H must be >= 1".into()));
    }
    if h > ma.horizon() {
        return Err(Error::InvalidConfig(format!(
            "horizon {h} exceeds MA truncation {}",
            ma.horizon()
        )));
    }
    let n = ma.n();
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

    let mut numer = DMatrix::<f64>::zeros(n, n);
    let mut denom = vec![0.0f64; n];
    for psi_h in &ma.psi()[..h] {
        let a = psi_h * sigma;
        for j in 0..n {
            let mut power = 0.0;
            for k in 0..n {
                numer[(j, k)] += a[(j, k)] * a[(j, k)];
                power += a[(j, k)] * psi_h[(j, k)];
            }
            denom[j] += power;
        }
    }

    let mut theta = DMatrix::zeros(n, n);
    for j in 0..n {
        if denom[j] <= 0.0 {
            return Err(Error::DegenerateVariance {
                index: j,
                value: denom[j],
            });
        }
        for k in 0..n {
            theta[(j, k)] = numer[(j, k)] / (sigma[(k, k)] * denom[j]);
        }
    }
    let theta_tilde = row_standardize(&theta)?;
    Ok(FevdMatrix {
        horizon: h,
        theta,
        theta_tilde,
    })
}

pub(crate) fn row_standardize(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = theta.nrows();
    let mut out = theta.clone();
    for j in 0..n {
        let row_sum: f64 = theta.row(j).sum();
        if row_sum <= 0.0 {
            return Err(Error::DegenerateVariance {
                index: j,
                value: row_sum,
            });
        }
        for k in 0..n {
            out[(j, k)] /= row_sum;
        }
    }
    Ok(out)
}

/// Total connectedness in percent: the off-diagonal share of the table,
/// 100 * (1 - trace / sum). With row-standardized input the sum is n.
pub fn total_connectedness(f: &FevdMatrix) -> f64 {
    let tt = &f.theta_tilde;
    let total: f64 = tt.sum();
    100.0 * (1.0 - tt.trace() / total)
}

/// Directional measures from a standardized decomposition.
pub fn directional(f: &FevdMatrix) -> DirectionalSummary {
    directional_of(&f.theta_tilde)
}

/// Directional measures from any (possibly band-restricted) scaled table.
pub(crate) fn directional_of(tt: &DMatrix<f64>) -> DirectionalSummary {
    let n = tt.nrows();
    let mut from_others = vec![0.0; n];
    let mut to_others = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                from_others[j] += 100.0 * tt[(j, k)];
                to_others[k] += 100.0 * tt[(j, k)];
            }
        }
    }
    let net: Vec<f64> = (0..n).map(|j| to_others[j] - from_others[j]).collect();
    let pairwise_net: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| 100.0 * (tt[(k, j)] - tt[(j, k)]))
                .collect()
        })
        .collect();
    let total = from_others.iter().sum::<f64>() / n as f64;
    DirectionalSummary {
        from_others,
        to_others,
        net,
        pairwise_net,
        total,
    }
}
