//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// All eigenvalues of the symmetric part strictly positive.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().all(|&e| e > 0.0)
}

/// Relative size below which `m2` counts as vanishing next to `m1`.
pub const PROPORTIONALITY_FLOOR: f64 = 1e-6;

/// Least-squares `λ` with `m2 ≈ λ m1` and the relative residual
/// `‖m2 − λ m1‖ / max(‖m2‖, 1e-6‖m1‖, 1e-14)`. Returns `None` when `m1`
/// vanishes.
///
/// The middle floor keeps an `m2` made of rounding noise (which happens
/// when the exact second derivative is zero) from reading as a large
/// relative residual.
pub fn proportionality(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Option<(f64, f64)> {
    let n1 = frobenius(m1);
    if n1 < 1e-12 {
        return None;
    }
    let lambda = m1.dot(m2) / (n1 * n1);
    let denom = frobenius(m2).max(PROPORTIONALITY_FLOOR * n1).max(1e-14);
    let res = frobenius(&(m2 - m1 * lambda)) / denom;
    Some((lambda, res))
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    frobenius(&(m - m.transpose()))
}
