//! Small dense helpers. Matrices passed as row-major `Vec`s are `n × n`.

use nalgebra::DMatrix;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

/// Relative threshold on `|det M|` below which a mass matrix counts as singular.
pub const DEGENERACY_RTOL: f64 = 1e-12;

/// Reject `M` when `|det M| < 1e-12 · (max |M_ab|)^N`.
pub fn check_nondegenerate(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let scale = m.amax();
    let det = m.clone().lu().determinant();
    let threshold = DEGENERACY_RTOL * scale.powi(n as i32);
    if !det.is_finite() || scale == 0.0 || det.abs() < threshold {
        return Err(Error::DegenerateLagrangian { det: det.abs(), threshold, t: None });
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting on the real parts, carried out in
/// the scalar type so derivative components propagate through the solve.
pub fn solve_generic<S: Scalar>(mut a: Vec<S>, n: usize, mut b: Vec<S>) -> Vec<S> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].value().abs().total_cmp(&a[j * n + col].value().abs()))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = a[col * n + col].recip();
        for row in col + 1..n {
            let factor = a[row * n + col].clone() * inv.clone();
            for k in col..n {
                let v = a[row * n + k].clone() - factor.clone() * a[col * n + k].clone();
                a[row * n + k] = v;
            }
            let v = b[row].clone() - factor * b[col].clone();
            b[row] = v;
        }
    }
    let mut x: Vec<S> = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row * n + k].clone() * x[k].clone();
        }
        x[row] = acc / a[row * n + row].clone();
    }
    x
}

pub fn to_dmatrix(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

pub fn values<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(Scalar::value).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
