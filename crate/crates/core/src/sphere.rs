//! Product quadrature on `S^1` and `S^2`.
//!
//! Panels break at the coordinate hyperplanes, where `l_p` gauges lose
//! smoothness, and each panel uses Gauss–Legendre after the substitution
//! `psi(s) = s^3 (10 - 15 s + 6 s^2)`, whose vanishing derivatives at the
//! panel ends absorb the remaining endpoint singularities.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{KlsError, Result};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub points: Vec<Vec<f64>>,
    /// Surface-measure weights; they sum to `|S^{n-1}|` (or the orthant share).
    pub weights: Vec<f64>,
}

fn smoothstep(s: f64) -> (f64, f64) {
    let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let d = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    (v, d)
}

/// Nodes and weights of the smoothed rule on `[a, b]`.
fn panel(m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(m);
    gl.mapped(0.0, 1.0)
        .map(|(s, w)| {
            let (v, d) = smoothstep(s);
            (a + (b - a) * v, (b - a) * d * w)
        })
        .collect()
}

impl SphereGrid {
    /// Full-sphere grid with `m` nodes per panel coordinate.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::build(n, m, false)
    }

    /// Grid restricted to the closed positive orthant.
    pub fn orthant(n: usize, m: usize) -> Result<Self> {
        Self::build(n, m, true)
    }

    fn build(n: usize, m: usize, orthant: bool) -> Result<Self> {
        let phi_panels = if orthant { 1 } else { 4 };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match n {
            2 => {
                for k in 0..phi_panels {
                    let a = k as f64 * FRAC_PI_2;
                    for (phi, w) in panel(m, a, a + FRAC_PI_2) {
                        points.push(vec![phi.cos(), phi.sin()]);
                        weights.push(w);
                    }
                }
            }
            3 => {
                let theta_panels: &[(f64, f64)] = if orthant {
                    &[(0.0, FRAC_PI_2)]
                } else {
                    &[(0.0, FRAC_PI_2), (FRAC_PI_2, PI)]
                };
                for &(ta, tb) in theta_panels {
                    for (theta, wt) in panel(m, ta, tb) {
                        let (st, ct) = theta.sin_cos();
                        for k in 0..phi_panels {
                            let a = k as f64 * FRAC_PI_2;
                            for (phi, wp) in panel(m, a, a + FRAC_PI_2) {
                                points.push(vec![st * phi.cos(), st * phi.sin(), ct]);
                                weights.push(wt * wp * st);
                            }
                        }
                    }
                }
            }
            _ => {
                return Err(KlsError::Unsupported(format!(
                    "sphere quadrature is only available for n <= 3 (got n = {n})"
                )))
            }
        }
        Ok(SphereGrid { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(u, w)| w * f(u)).sum()
    }
}
