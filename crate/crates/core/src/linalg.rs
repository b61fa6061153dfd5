//! Small dense-vector helpers on plain slices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{KlsError, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

pub fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    scale(a, 1.0 / n)
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `nu`,
/// as the columns of an `n x (n-1)` matrix (Householder reflection).
pub fn tangent_basis(nu: &[f64]) -> DMatrix<f64> {
    let n = nu.len();
    // Reflect nu onto -sign(nu_k) e_k with k the largest coordinate.
    let k = (0..n).max_by(|&i, &j| nu[i].abs().total_cmp(&nu[j].abs())).unwrap_or(0);
    let s = if nu[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = nu.to_vec();
    v[k] += s;
    let vv = norm_sq(&v);
    let mut basis = DMatrix::zeros(n, n - 1);
    let mut col = 0;
    for j in 0..n {
        if j == k {
            continue;
        }
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            basis[(i, col)] = e - 2.0 * v[i] * v[j] / vv;
        }
        col += 1;
    }
    basis
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Mean and covariance (divisor `N`) of a point cloud.
pub fn mean_and_covariance(points: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let count = points.len();
    let n = points.first().map(|p| p.len()).ok_or_else(|| KlsError::DegenerateCloud("empty cloud".into()))?;
    let mut mean = vec![0.0; n];
    for p in points {
        if p.len() != n {
            return Err(KlsError::InvalidInput("ragged point cloud".into()));
        }
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut cov = DMatrix::zeros(n, n);
    for p in points {
        for i in 0..n {
            let di = p[i] - mean[i];
            for j in i..n {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / count as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal_and_orthogonal_to_normal() {
        let nu = normalized(&[0.3, -1.2, 0.5, 2.0]);
        let b = tangent_basis(&nu);
        let g = b.transpose() * &b;
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-14);
            }
            let c: Vec<f64> = b.column(i).iter().copied().collect();
            assert!(dot(&c, &nu).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_survives_large_entries() {
        assert!((norm(&[3e200, 4e200]) / 5e200 - 1.0).abs() < 1e-15);
    }
}
