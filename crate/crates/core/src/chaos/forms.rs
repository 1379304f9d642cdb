use crate::error::{mismatch, Result};
use crate::norms::DenseMatrix;

use super::MatrixFamily;

/// `S_A(xi) = xi^T A xi`.
pub fn quad_form(a: &DenseMatrix, xi: &[f64]) -> Result<f64> {
    if !a.is_square() {
        return Err(mismatch(
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    decoupled_form(a, xi, xi)
}

/// `xi^T A eta`.
pub fn decoupled_form(a: &DenseMatrix, xi: &[f64], eta: &[f64]) -> Result<f64> {
    if xi.len() != a.rows() {
        return Err(mismatch(a.rows(), xi.len()));
    }
    if eta.len() != a.cols() {
        return Err(mismatch(a.cols(), eta.len()));
    }
    Ok(bilinear(a, xi, eta))
}

#[inline]
pub(crate) fn bilinear(a: &DenseMatrix, xi: &[f64], eta: &[f64]) -> f64 {
    (0..a.rows())
        .map(|i| xi[i] * a.row(i).iter().zip(eta).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

/// `sup_A | ||A xi||^2 - E||A xi||^2 |` for coordinates of unit variance.
pub fn centered_sup(family: &MatrixFamily, xi: &[f64]) -> Result<f64> {
    centered_sup_with_variance(family, xi, 1.0)
}

/// As [`centered_sup`], with every coordinate of variance `variance`.
pub fn centered_sup_with_variance(family: &MatrixFamily, xi: &[f64], variance: f64) -> Result<f64> {
    if xi.len() != family.cols() {
        return Err(mismatch(family.cols(), xi.len()));
    }
    let mut buf = vec![0.0; family.rows()];
    Ok(centered_sup_into(family, xi, variance, &mut buf))
}

/// As [`centered_sup`], with per-coordinate variances.
pub fn centered_sup_weighted(family: &MatrixFamily, xi: &[f64], variances: &[f64]) -> Result<f64> {
    if xi.len() != family.cols() {
        return Err(mismatch(family.cols(), xi.len()));
    }
    let mut buf = vec![0.0; family.rows()];
    let mut best = 0.0f64;
    for (k, a) in family.members().iter().enumerate() {
        a.mul_vec_into(xi, &mut buf);
        let energy: f64 = buf.iter().map(|v| v * v).sum();
        best = best.max((energy - family.expected_energy_weighted(k, variances)?).abs());
    }
    Ok(best)
}

/// Allocation-free kernel behind [`centered_sup`]; `buf` has `family.rows()` slots.
#[inline]
pub fn centered_sup_into(family: &MatrixFamily, xi: &[f64], variance: f64, buf: &mut [f64]) -> f64 {
    let mut best = 0.0f64;
    for (k, a) in family.members().iter().enumerate() {
        a.mul_vec_into(xi, buf);
        let energy: f64 = buf.iter().map(|v| v * v).sum();
        best = best.max((energy - family.expected_energy(k, variance)).abs());
    }
    best
}
