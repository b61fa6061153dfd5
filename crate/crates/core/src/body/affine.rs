use nalgebra::{DMatrix, DVector};

use crate::error::{KlsError, Result};
use crate::linalg::{mean_and_covariance, sym_eigen};

/// `x -> linear * x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub shift: Vec<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        AffineMap { linear: DMatrix::identity(n, n), shift: vec![0.0; n] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.linear * DVector::from_column_slice(x);
        y.iter().zip(&self.shift).map(|(a, b)| a + b).collect()
    }
}

/// Whitening map sending the cloud to barycenter 0 and identity covariance:
/// `x -> C^{-1/2} (x - m)`.
pub fn isotropic_normalize(points: &[Vec<f64>]) -> Result<AffineMap> {
    let n = points.first().map(|p| p.len()).unwrap_or(0);
    if points.len() < n + 1 || n == 0 {
        return Err(KlsError::DegenerateCloud(format!(
            "need at least n + 1 = {} points, got {}",
            n + 1,
            points.len()
        )));
    }
    let (mean, cov) = mean_and_covariance(points)?;
    let (vals, vecs) = sym_eigen(cov);
    let top = vals[n - 1];
    if !(vals[0] > 1e-12 * top) {
        return Err(KlsError::DegenerateCloud(format!(
            "covariance is singular (eigenvalues {:.3e} .. {:.3e})",
            vals[0], top
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(n, vals.iter().map(|v| 1.0 / v.sqrt())));
    let linear = &vecs * inv_sqrt * vecs.transpose();
    let m = &linear * DVector::from_column_slice(&mean);
    Ok(AffineMap { linear, shift: m.iter().map(|v| -v).collect() })
}
