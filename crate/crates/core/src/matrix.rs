//! Dense complex matrix helpers shared by every module.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

/// Dense complex matrix used for coefficients, pencils and transformations.
pub type CMat = Mat<c64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// Frobenius norm.
pub fn fro_norm(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// Largest singular value; zero for empty matrices.
pub fn matrix_two_norm(a: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_value_range(a)?.1)
}

/// Smallest and largest singular value, `(sigma_min, sigma_max)`.
///
/// For rectangular input the smallest of the `min(rows, cols)` values is
/// returned. Empty matrices report `(0, 0)`.
pub fn singular_value_range(a: MatRef<'_, c64>) -> Result<(f64, f64)> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok((0.0, 0.0));
    }
    if !all_finite(a) {
        return Err(Error::NonFinite);
    }
    let s = a.singular_values().map_err(|_| Error::Svd)?;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min, max))
}

pub fn all_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// True when every entry has an exactly zero imaginary part.
pub fn is_real(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im == 0.0))
}

/// Build a matrix from nested rows. Every row must have `cols` entries.
pub fn from_rows(rows: &[Vec<c64>]) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Real matrix from a row-major literal, used for hard-coded test data.
pub fn from_real_rows<const C: usize>(rows: &[[f64; C]]) -> CMat {
    Mat::from_fn(rows.len(), C, |i, j| c64::new(rows[i][j], 0.0))
}

pub fn to_rows(a: MatRef<'_, c64>) -> Vec<Vec<c64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}
