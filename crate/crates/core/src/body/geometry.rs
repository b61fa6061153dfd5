//! Volumes, surface areas and second moments.

use nalgebra::DMatrix;

use super::{BodyKind, ConvexBody};
use crate::error::{KlsError, Result};
use crate::linalg::norm;
use crate::quadrature::{adaptive_gk15, adaptive_half_line};
use crate::special::{gamma, ln_gamma, ln_unit_ball_volume, unit_ball_volume};
use crate::sphere::SphereGrid;

const GENERIC_GRID: usize = 48;

/// `E|M g|` for a standard Gaussian `g` and `M = diag(m)`, from
/// `|z| = (4 pi)^{-1/2} int_0^inf (1 - e^{-t z^2}) t^{-3/2} dt`.
fn gaussian_diag_norm_mean(m: &[f64]) -> Result<f64> {
    let m2: Vec<f64> = m.iter().map(|v| v * v).collect();
    // t = tau^2, tau = s / (1 - s)
    let r = adaptive_gk15(
        |s| {
            if s <= 0.0 {
                return 2.0 * m2.iter().sum::<f64>();
            }
            if s >= 1.0 {
                return 2.0;
            }
            let tau = s / (1.0 - s);
            let t = tau * tau;
            let ln_prod: f64 = m2.iter().map(|q| -0.5 * (2.0 * t * q).ln_1p()).sum();
            2.0 * (-ln_prod.exp_m1()) / (s * s)
        },
        0.0,
        1.0,
        1e-14,
        1e-12,
    )?;
    Ok(r.value / (2.0 * std::f64::consts::PI.sqrt()))
}

/// `E sqrt(sum_i |G_i|^{2p-2})` for `G_i` i.i.d. with density `exp(-|t|^p) / (2 Gamma(1+1/p))`.
fn lp_gradient_norm_mean(n: usize, p: f64) -> Result<f64> {
    let q = 2.0 * p - 2.0;
    let g1 = gamma(1.0 + 1.0 / p);
    // 1 - phi(t) with phi(t) = E exp(-t |G|^q). For t > 1 the integrand lives
    // on the scale t^{-1/q}, so integrate phi in the rescaled variable there.
    let one_minus_phi = |t: f64| -> f64 {
        let r = if t <= 1.0 {
            adaptive_half_line(|s| -(-t * s.powf(q)).exp_m1() * (-s.powf(p)).exp(), 1e-16, 1e-13)
                .map(|r| r.value / g1)
        } else {
            let l = t.powf(-1.0 / q);
            adaptive_half_line(|s| (-s.powf(q) - (l * s).powf(p)).exp(), 1e-16, 1e-13).map(|r| 1.0 - l * r.value / g1)
        };
        r.unwrap_or(f64::NAN)
    };
    let nf = n as f64;
    let r = adaptive_gk15(
        |s| {
            if s <= 0.0 || s >= 1.0 {
                return if s >= 1.0 { 2.0 } else { 0.0 };
            }
            let tau = s / (1.0 - s);
            let psi = one_minus_phi(tau * tau);
            2.0 * (-(nf * (-psi).ln_1p()).exp_m1()) / (s * s)
        },
        0.0,
        1.0,
        1e-13,
        1e-11,
    )?;
    if !r.value.is_finite() {
        return Err(KlsError::Domain("l_p surface integral did not converge".into()));
    }
    Ok(r.value / (2.0 * std::f64::consts::PI.sqrt()))
}

impl ConvexBody {
    /// Lebesgue volume `|K|`.
    pub fn volume(&self) -> Result<f64> {
        self.ln_volume().map(f64::exp)
    }

    /// `ln |K|`, finite for large dimensions where `|K|` under- or overflows.
    pub fn ln_volume(&self) -> Result<f64> {
        let n = self.dim;
        let nf = n as f64;
        Ok(match &self.kind {
            BodyKind::Ball { radius } => ln_unit_ball_volume(n) + nf * radius.ln(),
            BodyKind::Ellipsoid { semi_axes } => ln_unit_ball_volume(n) + semi_axes.iter().map(|a| a.ln()).sum::<f64>(),
            BodyKind::Cube { half_side } => nf * (2.0 * half_side).ln(),
            BodyKind::LpBall { p, scale } => {
                nf * (2.0 * scale).ln() + nf * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + nf / p)
            }
            BodyKind::Simplex { scale } => nf * scale.ln() - ln_gamma(nf + 1.0),
            BodyKind::GenericSmooth(_) => {
                let grid = SphereGrid::new(n, GENERIC_GRID)
                    .map_err(|_| KlsError::Unsupported(format!("no closed-form volume for {} with n > 3", self.label())))?;
                (grid.integrate(|u| self.gauge_unchecked(u).powi(-(n as i32))) / nf).ln()
            }
        })
    }

    /// Surface area `H^{n-1}(∂K)`.
    pub fn surface_area(&self) -> Result<f64> {
        let n = self.dim;
        let nf = n as f64;
        match &self.kind {
            BodyKind::Ball { radius } => Ok(nf * unit_ball_volume(n) * radius.powi(n as i32 - 1)),
            BodyKind::Ellipsoid { semi_axes } => {
                // |∂E| = n |E| E_{u ~ S^{n-1}} |A^{-1} u|
                let inv: Vec<f64> = semi_axes.iter().map(|a| 1.0 / a).collect();
                let e = gaussian_diag_norm_mean(&inv)? / crate::special::gaussian_norm_mean(n);
                Ok(nf * self.volume()? * e)
            }
            BodyKind::Cube { half_side } => Ok(2.0 * nf * (2.0 * half_side).powi(n as i32 - 1)),
            BodyKind::LpBall { p, scale } => {
                // |∂K| = n |K| E_cone |∇g|, with the cone measure of B_p realized as G / |G|_p
                let p = *p;
                let grad_mean = if p == 1.0 {
                    nf.sqrt()
                } else {
                    let radial = (ln_gamma((nf + p - 1.0) / p) - ln_gamma(nf / p)).exp();
                    lp_gradient_norm_mean(n, p)? / radial
                };
                Ok(nf * self.volume()? * grad_mean / scale)
            }
            BodyKind::Simplex { scale } => {
                let facet = (((nf - 1.0) * scale.ln()) - ln_gamma(nf)).exp();
                Ok(facet * (nf + nf.sqrt()))
            }
            BodyKind::GenericSmooth(_) => {
                let grid = SphereGrid::new(n, GENERIC_GRID).map_err(|_| {
                    KlsError::Unsupported(format!("no closed-form surface area for {} with n > 3", self.label()))
                })?;
                Ok(grid.integrate(|u| {
                    norm(&self.gauge_gradient_ae(u)) * self.gauge_unchecked(u).powi(-(n as i32))
                }))
            }
        }
    }

    /// Covariance matrix of the uniform measure on the body (barycenter is 0
    /// for every built-in kind).
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let nf = n as f64;
        Ok(match &self.kind {
            BodyKind::Ball { radius } => DMatrix::identity(n, n) * (radius * radius / (nf + 2.0)),
            BodyKind::Ellipsoid { semi_axes } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, semi_axes.iter().map(|a| a * a / (nf + 2.0))))
            }
            BodyKind::Cube { half_side } => DMatrix::identity(n, n) * (half_side * half_side / 3.0),
            BodyKind::LpBall { p, scale } => {
                let v = (ln_gamma(3.0 / p) + ln_gamma(nf / p + 1.0) - ln_gamma(1.0 / p) - ln_gamma((nf + 2.0) / p + 1.0)).exp();
                DMatrix::identity(n, n) * (scale * scale * v)
            }
            BodyKind::Simplex { scale } => {
                let c = scale * scale / ((nf + 1.0) * (nf + 1.0) * (nf + 2.0));
                DMatrix::from_fn(n, n, |i, j| if i == j { nf * c } else { -c })
            }
            BodyKind::GenericSmooth(_) => {
                return Err(KlsError::Unsupported("closed-form covariance of a gauge-only body".into()))
            }
        })
    }

    /// `E_{λ_K} |x|^2`.
    pub fn second_moment(&self) -> Result<f64> {
        Ok(self.covariance()?.trace())
    }

    /// Radius of the largest centered Euclidean ball inside the body.
    pub fn in_radius(&self) -> Result<f64> {
        let n = self.dim;
        let nf = n as f64;
        Ok(match &self.kind {
            BodyKind::Ball { radius } => *radius,
            BodyKind::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(f64::INFINITY, f64::min),
            BodyKind::Cube { half_side } => *half_side,
            BodyKind::LpBall { p, scale } => scale * nf.powf((0.5 - 1.0 / p).min(0.0)),
            BodyKind::Simplex { scale } => scale / ((nf + 1.0) * nf.sqrt()),
            BodyKind::GenericSmooth(_) => {
                let grid = SphereGrid::new(n, GENERIC_GRID)
                    .map_err(|_| KlsError::Unsupported(format!("in-radius of {} with n > 3", self.label())))?;
                1.0 / grid.points.iter().map(|u| self.gauge_unchecked(u)).fold(0.0, f64::max)
            }
        })
    }

    /// `|∂K| / (n |B_2^n|^{1/n} |K|^{(n-1)/n})`, at least 1 with equality for balls.
    pub fn isoperimetric_ratio(&self) -> Result<f64> {
        let nf = self.dim as f64;
        let ln_den = nf.ln() + ln_unit_ball_volume(self.dim) / nf + (nf - 1.0) / nf * self.ln_volume()?;
        Ok((self.surface_area()?.ln() - ln_den).exp())
    }
}
