//! Small dense helpers on top of `nalgebra`'s dynamic matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`, infinite when the LU factorization
/// hits an exact zero pivot.
pub fn condition_number(m: &Matrix) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Inverse through partial-pivot LU, rejecting matrices whose condition
/// estimate exceeds [`MAX_CONDITION`].
pub fn invert(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(GeoError::argument(format!(
            "cannot invert a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(GeoError::Singular {
            condition: f64::INFINITY,
        })?;
    let condition = norm1(m) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(GeoError::Singular { condition });
    }
    Ok(inv)
}

/// Solves `A X = B` with partial pivoting and the same conditioning guard as
/// [`invert`].
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let condition = condition_number(a);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(GeoError::Singular { condition });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(GeoError::Singular { condition })
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(m: &Matrix) -> Matrix {
    m.exp()
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Row-major nested vectors, the shape used in reports and configs.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn serialize_matrix<S: serde::Serializer>(m: &Matrix, ser: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), ser)
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(GeoError::argument("empty matrix"));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(GeoError::argument("ragged or empty matrix rows"));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
