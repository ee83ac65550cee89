//! Dense least squares via the normal equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `A x = b` for square `A` by Gaussian elimination with partial
/// pivoting. Pivots below `tol · max|A|` are reported as singular.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>, tol: T) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("solve expects a square system".into()));
    }
    let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Err(Error::Singular("all-zero matrix".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= tol * scale {
            return Err(Error::Singular(format!("pivot {col} vanishes")));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Ordinary least squares `min ‖X β − y‖²` through `XᵀX β = Xᵀy`.
pub fn least_squares<T: Scalar>(design: &[Vec<T>], y: &[T]) -> Result<Vec<T>> {
    if design.is_empty() {
        return Err(Error::Empty("least squares without observations".into()));
    }
    if design.len() != y.len() {
        return Err(Error::Shape(format!("{} rows vs {} targets", design.len(), y.len())));
    }
    let p = design[0].len();
    if design.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("ragged design matrix".into()));
    }
    let mut xtx = vec![vec![T::zero(); p]; p];
    let mut xty = vec![T::zero(); p];
    for (row, &target) in design.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * target;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    solve(xtx, xty, T::epsilon() * T::lit(1e3))
}
