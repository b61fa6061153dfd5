//! The radial map `T(x) = x / g(x)` onto the boundary of a body, the
//! operator norm of its codifferential, and the transfer functional
//! `∫ ‖dT*‖²_op dμ` for log-concave sources.

use serde::Serialize;

use crate::ball_body::{c_pn, kmu_body, kmu_gauge, LogConcaveMeasure};
use crate::body::{BodyKind, ConvexBody};
use crate::error::{KlsError, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::measures::mc::{batched_sums, McPlan, MomentReport};
use crate::measures::stream_id;
use crate::special::ln_gamma;

/// Relative spread tolerated between the three operator-norm formulas.
pub const FORMULA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialMapEval {
    pub x: Vec<f64>,
    pub tx: Vec<f64>,
    pub op_norm: f64,
    /// `|x||∇g| / g²`, `1 / (g <x/|x|, ν>)` and `|x| / (g² h_K(ν))`.
    pub formula_values: [f64; 3],
}

pub fn radial_map(body: &ConvexBody, x: &[f64]) -> Result<Vec<f64>> {
    let g = body.gauge(x)?;
    if !(g > 0.0) {
        return Err(KlsError::InvalidInput("radial map is undefined at the origin".into()));
    }
    Ok(x.iter().map(|v| v / g).collect())
}

/// `‖dT*(x)‖_op` by the three equivalent expressions.
pub fn op_norm_dt(body: &ConvexBody, x: &[f64]) -> Result<RadialMapEval> {
    let g = body.gauge(x)?;
    if !(g > 0.0) {
        return Err(KlsError::InvalidInput("radial map is undefined at the origin".into()));
    }
    let grad = body.gauge_gradient(x)?;
    let gn = norm(&grad);
    let r = norm(x);
    let nu: Vec<f64> = grad.iter().map(|v| v / gn).collect();
    let f1 = r * gn / (g * g);
    let f2 = 1.0 / (g * dot(x, &nu) / r);
    let f3 = match body.support(&nu) {
        Ok(h) => r / (g * g * h),
        // Gauge-only bodies: h_K(ν) = <T x, ν> on the boundary.
        Err(KlsError::Unsupported(_)) => r / (g * dot(x, &nu)),
        Err(e) => return Err(e),
    };
    let values = [f1, f2, f3];
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    if !((hi - lo) <= FORMULA_TOL * hi) {
        return Err(KlsError::InternalConsistency(format!(
            "operator-norm formulas disagree at {x:?}: {values:?}"
        )));
    }
    Ok(RadialMapEval { x: x.to_vec(), tx: x.iter().map(|v| v / g).collect(), op_norm: f1, formula_values: values })
}

/// `‖dT*(x)‖²_op` from the gradient form, using the a.e. gradient so that
/// measure-zero kinks never abort an integration.
fn op_norm_sq_ae(body: &ConvexBody, x: &[f64]) -> f64 {
    let g = body.gauge_unchecked(x);
    let grad = body.gauge_gradient_ae(x);
    norm_sq(x) * norm_sq(&grad) / g.powi(4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    /// `∫ ‖dT*‖²_op dμ`.
    pub integral: MomentReport,
    /// `f(0)^{2/n} / R² · ∫_{K} |x|² dx`, the bound with its constant dropped.
    pub rhs: f64,
    pub ratio: f64,
    pub in_radius: f64,
}

/// Gauge agreement between `body` and `K_μ` on coordinate and diagonal
/// directions.
fn check_is_kmu(mu: &LogConcaveMeasure, body: &ConvexBody) -> Result<()> {
    let n = mu.dim();
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    dirs.push(vec![1.0; n]);
    dirs.push((0..n).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect());
    for u in dirs {
        let (a, b) = (kmu_gauge(mu, &u)?, body.gauge(&u)?);
        if (a - b).abs() > 1e-6 * a {
            return Err(KlsError::Precondition(format!(
                "{} is not K_mu of {}: gauges {b} vs {a} at {u:?}",
                body.label(),
                mu.label()
            )));
        }
    }
    Ok(())
}

/// Monte Carlo `∫ ‖dT*‖²_op dμ` for `T(x) = x / ‖x‖_{K_μ}`.
pub fn transfer_integral(mu: &LogConcaveMeasure, body: &ConvexBody, plan: &McPlan) -> Result<TransferReport> {
    if body.dim() != mu.dim() {
        return Err(KlsError::InvalidInput("body and measure dimensions differ".into()));
    }
    check_is_kmu(mu, body)?;
    let plan = plan.with_stream(stream_id(&format!("transfer/{}", mu.label())));
    let n = mu.dim() as f64;
    let integral = match mu {
        // ‖dT*‖² is homogeneous of degree -2, so along each ray of the
        // source the radial integral is exactly n/(n-2); sampling only
        // directions avoids the |x|^{-2} singularity.
        LogConcaveMeasure::UniformBody(src) => {
            if n <= 2.0 {
                return Err(KlsError::InvalidParameter("transfer integral diverges for n <= 2".into()));
            }
            let region = crate::measures::Region::whole(src.clone());
            let radial = n / (n - 2.0);
            crate::measures::ray_moments(&region, &crate::measures::RayScheme::monte_carlo(plan), 1, |y, _, out| {
                out[0] = radial * op_norm_sq_ae(body, y);
                Ok(())
            })?
            .report(|m| m[0])
        }
        _ => batched_sums(&plan, 1, |rng, count, emit| mu.for_each_point(rng, count, |x| emit(&[op_norm_sq_ae(body, x)])))?
            .report(|m| m[0]),
    };
    let r = body.in_radius()?;
    let rhs = mu.f_at_origin().powf(2.0 / n) / (r * r) * body.second_moment()? * body.volume()?;
    Ok(TransferReport { integral, rhs, ratio: integral.estimate / rhs, in_radius: r })
}

/// `∫ dσ / h_K(ν)²` over the cone measure, the sharper replacement for
/// `1/R²` (reported only).
pub fn refined_support_term(body: &ConvexBody, plan: &McPlan) -> Result<MomentReport> {
    let region = crate::measures::Region::whole(body.clone());
    let sampler = crate::measures::UniformSampler::auto(region)?;
    let plan = plan.with_stream(stream_id(&format!("refined/{}", body.label())));
    let sums = batched_sums(&plan, 1, |rng, count, emit| {
        sampler.for_each_point(rng, count, |x| {
            let g = body.gauge_unchecked(x);
            let y: Vec<f64> = x.iter().map(|v| v / g).collect();
            let grad = body.gauge_gradient_ae(&y);
            // <y, ν> = g(y) / |∇g(y)| = 1 / |∇g(y)|
            emit(&[norm_sq(&grad)]);
        });
        Ok(())
    })?;
    Ok(sums.report(|m| m[0]))
}

/// Exponent `e = (n + 2p - 2)/p` of the `l_p` scaling integrals.
fn lp_exponent(p: f64, n: usize) -> f64 {
    (n as f64 + 2.0 * p - 2.0) / p
}

/// `A = ∫ e^{-t}(t^{-2} + 2t^{-3}) t^e dt / ∫ e^{-t} t^e dt = 1/((e-1)(e-2))`.
pub fn lp_a_factor(p: f64, n: usize) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(KlsError::InvalidParameter(format!("p must lie in [1, inf), got {p}")));
    }
    let e = lp_exponent(p, n);
    if !(e > 2.0) {
        return Err(KlsError::InvalidParameter(format!("A diverges: (n + 2p - 2)/p = {e} <= 2")));
    }
    Ok(1.0 / ((e - 1.0) * (e - 2.0)))
}

/// `B = E_{μ_p} |t|^{2p-2} = Γ(2 - 1/p) / (p Γ(1 + 1/p))`.
pub fn lp_b_factor(p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(KlsError::InvalidParameter(format!("p must lie in [1, inf), got {p}")));
    }
    Ok((ln_gamma(2.0 - 1.0 / p) - ln_gamma(1.0 + 1.0 / p)).exp() / p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpScalingRow {
    pub p: f64,
    pub n: usize,
    pub a_factor: f64,
    pub b_factor: f64,
    /// `n² A B`.
    pub assembled: f64,
    /// Monte Carlo `n E[Σ|x_i|^{2p-2} / ‖x‖_p^{2p}]` under `μ_p^n`.
    pub integral_mc: MomentReport,
    /// Monte Carlo `∫ ‖dT*‖²_op dμ_p^n` onto `c_{p,n} B_p^n`.
    pub transfer: MomentReport,
}

/// One row of the `l_p` scaling sweep.
pub fn lp_scaling_row(p: f64, n: usize, plan: &McPlan) -> Result<LpScalingRow> {
    let a = lp_a_factor(p, n)?;
    let b = lp_b_factor(p)?;
    let c = c_pn(p, n)?;
    let mu = LogConcaveMeasure::mu_p(p, n)?;
    let plan = plan.with_stream(stream_id(&format!("lp-scaling/{p}/{n}")));
    let nf = n as f64;
    let sums = batched_sums(&plan, 2, |rng, count, emit| {
        mu.for_each_point(rng, count, |x| {
            let mut sp = 0.0;
            let mut s2 = 0.0;
            for v in x {
                let a = v.abs();
                sp += a.powf(p);
                s2 += a.powf(2.0 * p - 2.0);
            }
            // ‖x‖_p^{2p} = (Σ|x_i|^p)^2
            let scaled = nf * s2 / (sp * sp);
            let norm_p_sq = sp.powf(2.0 / p);
            emit(&[scaled, c * c * norm_sq(x) * s2 / (sp * sp * norm_p_sq)]);
        })
    })?;
    Ok(LpScalingRow {
        p,
        n,
        a_factor: a,
        b_factor: b,
        assembled: nf * nf * a * b,
        integral_mc: sums.report(|m| m[0]),
        transfer: sums.report(|m| m[1]),
    })
}

/// `∫ ‖dT*‖²_op dμ` for the uniform law on `[-1,1]^n` onto `[-1/2,1/2]^n`,
/// where the operator norm is `|x| / (2 ‖x‖²_∞)`.
pub fn cube_transfer(n: usize, plan: &McPlan) -> Result<MomentReport> {
    let mu = LogConcaveMeasure::UniformBody(ConvexBody::cube(n, 1.0)?);
    let body = ConvexBody::cube(n, 0.5)?;
    Ok(transfer_integral(&mu, &body, plan)?.integral)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FvrReport {
    pub measure: String,
    pub n: usize,
    /// In-radius of `K_μ`.
    pub r: f64,
    /// `∫ |x|² dλ_{K_μ}`.
    pub second_moment_kmu: f64,
    pub volume_ratio_term: f64,
    pub f0_pow: f64,
    /// `P^N_μ` when the source is a product law (by tensorization, the
    /// 1-D constant), else `None`.
    pub poincare_mu: Option<f64>,
    /// `volume_ratio_term · f(0)^{2/n} · P^N_μ`, constant dropped.
    pub bound_rhs: Option<f64>,
    /// `P^Lin_{K_μ} / (f(0)^{2/n} P^Lin_μ)`.
    pub plin_ratio: f64,
}

/// Largest eigenvalue of the covariance of `μ`.
fn plin_measure(mu: &LogConcaveMeasure) -> Result<f64> {
    Ok(match mu {
        LogConcaveMeasure::MuP { p, .. } => (ln_gamma(3.0 / p) - ln_gamma(1.0 / p)).exp(),
        LogConcaveMeasure::Gaussian { .. } => 1.0,
        LogConcaveMeasure::UniformBody(b) => crate::linalg::sym_eigen(b.covariance()?).0.last().copied().unwrap_or(0.0),
        LogConcaveMeasure::Custom1dProduct { law, .. } => {
            let m = law.mean()?;
            crate::quadrature::adaptive_gk15(|t| (t - m) * (t - m) * law.density(t), law.lo, law.hi, 1e-14, 1e-12)?
                .value
        }
    })
}

/// Quantities of the finite-volume-ratio transfer for `μ`.
pub fn fvr_pipeline(mu: &LogConcaveMeasure) -> Result<FvrReport> {
    let n = mu.dim();
    if matches!(mu, LogConcaveMeasure::Custom1dProduct { .. }) && n > 3 {
        return Err(KlsError::Unsupported("in-radius of a custom K_mu is only certified for n <= 3".into()));
    }
    let body = kmu_body(mu)?;
    let r = body.in_radius()?;
    let (second, plin_k) = match body.kind() {
        BodyKind::GenericSmooth(_) => {
            let region = crate::measures::Region::whole(body.clone());
            let m2 = crate::measures::polar_quadrature(&region, norm_sq, 8, 32)?;
            let mut cov = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = crate::measures::polar_quadrature(&region, |x| x[i] * x[j], 8, 32)?;
                    cov[(i, j)] = v;
                    cov[(j, i)] = v;
                }
            }
            (m2, crate::linalg::sym_eigen(cov).0.last().copied().unwrap_or(0.0))
        }
        _ => (body.second_moment()?, crate::linalg::sym_eigen(body.covariance()?).0.last().copied().unwrap_or(0.0)),
    };
    let f0_pow = mu.f_at_origin().powf(2.0 / n as f64);
    let poincare_mu = match mu {
        LogConcaveMeasure::MuP { p, .. } => Some(crate::poincare::p_1d_mu_p(*p)?.value),
        LogConcaveMeasure::Gaussian { .. } => Some(1.0),
        LogConcaveMeasure::Custom1dProduct { law, .. } => Some(crate::poincare::p_1d_custom(law)?.value),
        LogConcaveMeasure::UniformBody(_) => None,
    };
    let volume_ratio_term = second / (r * r);
    Ok(FvrReport {
        measure: mu.label(),
        n,
        r,
        second_moment_kmu: second,
        volume_ratio_term,
        f0_pow,
        poincare_mu,
        bound_rhs: poincare_mu.map(|p| volume_ratio_term * f0_pow * p),
        plin_ratio: plin_k / (f0_pow * plin_measure(mu)?),
    })
}
