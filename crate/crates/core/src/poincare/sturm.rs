//! Spectral gap of a 1-D log-concave measure.
//!
//! Finite volumes on a uniform grid: cell masses `ρ_i = h f(t_i)` and
//! interface conductances `f(t_{i+1/2}) / h`, giving `K u = λ M u` with `K`
//! a zero-flux weighted Laplacian. The symmetric form `M^{-1/2} K M^{-1/2}`
//! is tridiagonal and built from log-density differences, so densities
//! spanning many orders of magnitude stay well scaled. The second eigenvalue
//! comes from Sturm-count bisection.

use crate::error::{KlsError, Result};
use crate::quadrature::adaptive_gk15;

/// Mass that the truncation interval must carry.
pub const MASS_FLOOR: f64 = 1.0 - 1e-10;

/// Second Neumann eigenpair on a grid.
#[derive(Debug, Clone)]
pub struct Mode1d {
    pub lambda: f64,
    /// Cell centers.
    pub grid: Vec<f64>,
    /// Eigenfunction at the cell centers, normalized to unit `L^2(μ)` norm.
    pub values: Vec<f64>,
}

impl Mode1d {
    fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.grid[1] - self.grid[0];
        let s = ((t - self.grid[0]) / h).clamp(0.0, (self.grid.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.grid.len() - 2);
        (i, s - i as f64)
    }

    /// Piecewise-linear eigenfunction, constant beyond the outer centers.
    pub fn eval(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// Derivative of [`Mode1d::eval`]; zero beyond the outer centers.
    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.grid[0] || t >= self.grid[self.grid.len() - 1] {
            return 0.0;
        }
        let h = self.grid[1] - self.grid[0];
        let (i, _) = self.locate(t);
        (self.values[i + 1] - self.values[i]) / h
    }
}

/// Checks that `[lo, hi]` carries at least [`MASS_FLOOR`] of the measure.
///
/// Beyond an endpoint where the density is positive, log-concavity bounds
/// the tail by `f(b) / |(log f)'(b)|`, valid when the log-density is
/// decreasing outward there.
pub fn check_truncation(log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let peak = {
        let (mut a, mut b) = (lo, hi);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        while b - a > 1e-9 * (hi - lo) {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if log_density(c) >= log_density(d) {
                b = d;
            } else {
                a = c;
            }
        }
        log_density(0.5 * (a + b)).max(log_density(lo)).max(log_density(hi))
    };
    if !peak.is_finite() {
        return Err(KlsError::Domain("log-density is not finite on the interval".into()));
    }
    let f = |t: f64| (log_density(t) - peak).exp();
    let inside = adaptive_gk15(f, lo, hi, 1e-300, 1e-12)?.value;
    let eps = 1e-6 * (hi - lo);
    let mut tail = 0.0;
    for (b, outward) in [(lo, -1.0), (hi, 1.0)] {
        let beyond = log_density(b + outward * eps * 1e-3);
        if beyond == f64::NEG_INFINITY {
            continue;
        }
        let slope = (log_density(b) - log_density(b - outward * eps)) / eps;
        if !(slope < 0.0) {
            return Err(KlsError::Domain(format!("log-density does not decay beyond {b}; tail mass unbounded")));
        }
        tail += f(b) / -slope;
    }
    let mass = inside / (inside + tail);
    if mass < MASS_FLOOR {
        return Err(KlsError::Domain(format!("interval [{lo}, {hi}] carries mass {mass:.12}, below {MASS_FLOOR}")));
    }
    Ok(mass)
}

/// Diagonal and off-diagonal of `M^{-1/2} K M^{-1/2}`, plus cell centers.
fn assemble(log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / cells as f64;
    let centers: Vec<f64> = (0..cells).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let lc: Vec<f64> = centers.iter().map(|&t| log_density(t)).collect();
    let mut diag = vec![0.0; cells];
    let mut off = vec![0.0; cells - 1];
    for i in 0..cells - 1 {
        let lf = log_density(lo + (i + 1) as f64 * h);
        // w / h^2 scaled by the cell masses on either side.
        off[i] = -(lf - 0.5 * (lc[i] + lc[i + 1])).exp() / (h * h);
        diag[i] += (lf - lc[i]).exp() / (h * h);
        diag[i + 1] += (lf - lc[i + 1]).exp() / (h * h);
    }
    (diag, off, centers)
}

/// Number of eigenvalues below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let b = off[i - 1];
        let prev = if d == 0.0 { f64::EPSILON * (b.abs() + 1.0) } else { d };
        d = diag[i] - x - b * b / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Second-smallest eigenvalue by bisection on the Sturm count.
fn second_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let mut hi = diag
        .iter()
        .enumerate()
        .map(|(i, d)| d + if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |b| b.abs()))
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - σ) x = b` for symmetric tridiagonal `T` (Thomas algorithm).
fn tridiagonal_solve(diag: &[f64], off: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0] - sigma;
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = b[0] / denom;
    for i in 1..n {
        denom = diag[i] - sigma - off[i - 1] * c[i - 1];
        if denom == 0.0 {
            denom = f64::EPSILON;
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (b[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Second eigenpair of the zero-flux operator `-(1/ρ)(ρ u')'` on `cells`
/// uniform cells of `[lo, hi]`.
pub fn second_mode(log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Result<Mode1d> {
    if cells < 8 {
        return Err(KlsError::InvalidParameter(format!("need at least 8 cells, got {cells}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(KlsError::InvalidParameter(format!("interval [{lo}, {hi}]")));
    }
    let (diag, off, grid) = assemble(log_density, lo, hi, cells);
    if diag.iter().chain(&off).any(|v| !v.is_finite()) {
        return Err(KlsError::Domain("density vanishes inside the interval".into()));
    }
    let lambda = second_eigenvalue(&diag, &off);
    // Inverse iteration just below λ for the symmetric-form eigenvector.
    let sigma = lambda * (1.0 - 1e-9);
    let mut v: Vec<f64> = grid.iter().map(|t| t - 0.5 * (lo + hi)).collect();
    for _ in 0..3 {
        v = tridiagonal_solve(&diag, &off, sigma, &v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    // Back to u = M^{-1/2} v, normalized in L^2(μ) on the grid.
    let lc: Vec<f64> = grid.iter().map(|&t| log_density(t)).collect();
    let lmax = lc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = v.iter().zip(&lc).map(|(x, l)| x * (-(l - lmax) / 2.0).exp()).collect();
    let weights: Vec<f64> = lc.iter().map(|l| (l - lmax).exp()).collect();
    let mass: f64 = weights.iter().sum();
    let mean = values.iter().zip(&weights).map(|(u, w)| u * w).sum::<f64>() / mass;
    values.iter_mut().for_each(|u| *u -= mean);
    let norm = (values.iter().zip(&weights).map(|(u, w)| u * u * w).sum::<f64>() / mass).sqrt();
    values.iter_mut().for_each(|u| *u /= norm);
    Ok(Mode1d { lambda, grid, values })
}
