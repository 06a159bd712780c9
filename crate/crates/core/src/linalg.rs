//! Small shared matrix helpers: row-major (de)serialization images and
//! covariance validation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major nested-vec image of a matrix, the JSON wire format.
pub(crate) fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn rows_mat(
    rows: &[Vec<f64>],
    ncols_hint: usize,
) -> std::result::Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(ncols_hint);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".to_string());
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Covariance sanity: square, symmetric within 1e-10 relative, eigenvalues
/// above -1e-10 relative.
pub(crate) fn validate_sigma(sigma: &DMatrix<f64>) -> Result<()> {
    let n = sigma.nrows();
    if sigma.ncols() != n || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "sigma must be square and nonempty, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax().max(1e-300);
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidConfig(format!(
                    "sigma not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let min_eig = sigma
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * scale {
        return Err(Error::InvalidConfig(format!(
            "sigma not positive semidefinite (eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}
