//! The body `K_μ` of a log-concave probability measure, with gauge
//! `1/‖x‖ = (n ∫_0^∞ r^{n-1} f(r x) dr)^{1/n}`, and the lemmas it rests on.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::body::{BodyDescriptor, ConvexBody, GenericGauge};
use crate::error::{KlsError, Result};
use crate::linalg::{norm, norm_sq};
use crate::measures::mc::{batched_sums, McPlan, MomentReport};
use crate::measures::uniform::{Region, UniformSampler};
use crate::measures::{Custom1d, MuP};
use crate::quadrature::adaptive_gk15;
use crate::special::{ln_gamma, ln_unit_ball_volume};
use crate::sphere::SphereGrid;

/// Relative accuracy of quadrature gauges.
pub const GAUGE_RTOL: f64 = 1e-10;
/// Radial tails below this fraction of the accumulated integral are dropped.
pub const TAIL_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone)]
pub enum LogConcaveMeasure {
    /// `μ_p^n`, density `∏ exp(-|x_i|^p) / (2 Γ(1 + 1/p))`.
    MuP { p: f64, n: usize },
    /// Standard Gaussian.
    Gaussian { n: usize },
    /// Uniform probability on a body of any volume.
    UniformBody(ConvexBody),
    /// `n`-fold product of a one-dimensional law.
    Custom1dProduct { law: Custom1d, n: usize },
}

/// Config form of a measure: `{type = "mu_p", p, n}`, `{type = "gaussian", n}`,
/// `{type = "uniform_body", body}` or `{type = "custom_1d_product", density_table, n}`.
/// Table rows are `[t, f(t)]` with `f > 0`; `log f` is interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum MeasureDescriptor {
    #[serde(rename = "mu_p")]
    MuP { p: f64, n: usize },
    #[serde(rename = "gaussian")]
    Gaussian { n: usize },
    #[serde(rename = "uniform_body")]
    UniformBody { body: BodyDescriptor },
    #[serde(rename = "custom_1d_product")]
    Custom1dProduct { density_table: Vec<[f64; 2]>, n: usize },
}

impl MeasureDescriptor {
    pub fn build(&self) -> Result<LogConcaveMeasure> {
        match self {
            MeasureDescriptor::MuP { p, n } => LogConcaveMeasure::mu_p(*p, *n),
            MeasureDescriptor::Gaussian { n } => LogConcaveMeasure::gaussian(*n),
            MeasureDescriptor::UniformBody { body } => Ok(LogConcaveMeasure::UniformBody(body.build()?)),
            MeasureDescriptor::Custom1dProduct { density_table, n } => {
                check_n(*n)?;
                if density_table.iter().any(|r| !(r[1] > 0.0)) {
                    return Err(KlsError::Config("density_table values must be positive".into()));
                }
                let rows: Vec<(f64, f64)> = density_table.iter().map(|r| (r[0], r[1].ln())).collect();
                Ok(LogConcaveMeasure::Custom1dProduct { law: Custom1d::from_log_table(&rows)?, n: *n })
            }
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(KlsError::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(())
}

/// `c_{p,n} = Γ(n/p + 1)^{1/n} / (2 Γ(1/p + 1))`, so that `K_{μ_p^n} = c_{p,n} B_p^n`.
pub fn c_pn(p: f64, n: usize) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(KlsError::InvalidParameter(format!("p must lie in [1, inf), got {p}")));
    }
    if n < 2 {
        return Err(KlsError::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((ln_gamma(nf / p + 1.0) / nf - std::f64::consts::LN_2 - ln_gamma(1.0 / p + 1.0)).exp())
}

/// Radius of `K_γ` for the standard Gaussian: `(2^{n/2} Γ(n/2+1))^{1/n} / √(2π)`.
pub fn gaussian_kmu_radius(n: usize) -> f64 {
    let nf = n as f64;
    ((nf / 2.0 * std::f64::consts::LN_2 + ln_gamma(nf / 2.0 + 1.0)) / nf).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl LogConcaveMeasure {
    pub fn mu_p(p: f64, n: usize) -> Result<Self> {
        check_n(n)?;
        MuP::new(p)?;
        Ok(LogConcaveMeasure::MuP { p, n })
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(LogConcaveMeasure::Gaussian { n })
    }

    pub fn dim(&self) -> usize {
        match self {
            LogConcaveMeasure::MuP { n, .. } | LogConcaveMeasure::Gaussian { n } => *n,
            LogConcaveMeasure::UniformBody(b) => b.dim(),
            LogConcaveMeasure::Custom1dProduct { n, .. } => *n,
        }
    }

    pub fn label(&self) -> String {
        match self {
            LogConcaveMeasure::MuP { p, n } => format!("mu_{p}^{n}"),
            LogConcaveMeasure::Gaussian { n } => format!("gaussian^{n}"),
            LogConcaveMeasure::UniformBody(b) => format!("uniform({})", b.label()),
            LogConcaveMeasure::Custom1dProduct { n, .. } => format!("custom^{n}"),
        }
    }

    /// `log f(x)`, `-inf` off the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            LogConcaveMeasure::MuP { p, n } => {
                -x.iter().map(|v| v.abs().powf(*p)).sum::<f64>()
                    - *n as f64 * (std::f64::consts::LN_2 + ln_gamma(1.0 / p + 1.0))
            }
            LogConcaveMeasure::Gaussian { n } => {
                -0.5 * norm_sq(x) - 0.5 * *n as f64 * (2.0 * std::f64::consts::PI).ln()
            }
            LogConcaveMeasure::UniformBody(b) => {
                if b.gauge_unchecked(x) <= 1.0 {
                    -b.ln_volume().unwrap_or(f64::NAN)
                } else {
                    f64::NEG_INFINITY
                }
            }
            LogConcaveMeasure::Custom1dProduct { law, .. } => x.iter().map(|t| law.log_density(*t)).sum(),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub fn f_at_origin(&self) -> f64 {
        self.density(&vec![0.0; self.dim()])
    }

    /// `M = sup f`: analytic for the built-in laws; for products of a
    /// custom law, the power of the 1-D maximum found by golden-section
    /// search (exact for log-concave profiles up to the search tolerance).
    pub fn max_density(&self) -> Result<f64> {
        Ok(match self {
            LogConcaveMeasure::MuP { .. } | LogConcaveMeasure::Gaussian { .. } => self.f_at_origin(),
            LogConcaveMeasure::UniformBody(b) => (-b.ln_volume()?).exp(),
            LogConcaveMeasure::Custom1dProduct { law, n } => law.density(law.mode()).powi(*n as i32),
        })
    }

    pub fn barycenter(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        match self {
            LogConcaveMeasure::Custom1dProduct { law, .. } => Ok(vec![law.mean()?; n]),
            LogConcaveMeasure::UniformBody(b) if !b.is_unconditional() => match b.kind() {
                crate::body::BodyKind::Simplex { .. } => Ok(vec![0.0; n]),
                _ => Err(KlsError::Unsupported(format!("no barycenter formula for {}", b.label()))),
            },
            _ => Ok(vec![0.0; n]),
        }
    }

    /// 3-point midpoint test of log-concavity on random segments in a box of
    /// half-side `extent`; returns the worst violation found.
    pub fn log_concavity_defect(&self, trials: usize, extent: f64, seed: u64) -> f64 {
        let n = self.dim();
        let mut rng = crate::measures::mc::chunk_rng(seed, crate::measures::stream_id("log-concavity"), 0);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let a: Vec<f64> = (0..n).map(|_| extent * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| extent * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
            let (la, lb, lm) = (self.log_density(&a), self.log_density(&b), self.log_density(&m));
            if la.is_finite() && lb.is_finite() {
                let defect = 0.5 * (la + lb) - lm;
                if defect.is_nan() || lm == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                worst = worst.max(defect);
            }
        }
        worst
    }

    /// Draws `count` points of `μ`.
    pub fn for_each_point(&self, rng: &mut ChaCha8Rng, count: usize, mut emit: impl FnMut(&[f64])) -> Result<()> {
        let n = self.dim();
        match self {
            LogConcaveMeasure::MuP { p, .. } => {
                let law = MuP::new(*p)?;
                crate::measures::mu_p::for_each_product_point(&law, n, rng, count, emit);
            }
            LogConcaveMeasure::Gaussian { .. } => {
                let mut x = vec![0.0; n];
                for _ in 0..count {
                    for v in x.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    emit(&x);
                }
            }
            LogConcaveMeasure::UniformBody(b) => {
                UniformSampler::auto(Region::whole(b.clone()))?.for_each_point(rng, count, emit);
            }
            LogConcaveMeasure::Custom1dProduct { law, .. } => {
                crate::measures::mu_p::for_each_product_point(law, n, rng, count, emit);
            }
        }
        Ok(())
    }
}

/// Closed-form `‖x‖_{K_μ}` where one exists.
pub fn kmu_gauge_closed_form(mu: &LogConcaveMeasure, x: &[f64]) -> Option<Result<f64>> {
    let n = mu.dim();
    match mu {
        LogConcaveMeasure::MuP { p, .. } => {
            Some(c_pn(*p, n).map(|c| crate::body::lp_norm(x, *p) / c))
        }
        LogConcaveMeasure::Gaussian { .. } => Some(Ok(norm(x) / gaussian_kmu_radius(n))),
        LogConcaveMeasure::UniformBody(b) => {
            Some(b.ln_volume().map(|lv| b.gauge_unchecked(x) * (lv / n as f64).exp()))
        }
        LogConcaveMeasure::Custom1dProduct { .. } => None,
    }
}

/// `‖x‖_{K_μ}`, from the closed form when available.
pub fn kmu_gauge(mu: &LogConcaveMeasure, x: &[f64]) -> Result<f64> {
    check_direction(mu, x)?;
    match kmu_gauge_closed_form(mu, x) {
        Some(r) => r,
        None => kmu_gauge_quadrature(mu, x),
    }
}

fn check_direction(mu: &LogConcaveMeasure, x: &[f64]) -> Result<()> {
    if x.len() != mu.dim() {
        return Err(KlsError::InvalidInput(format!("point of length {} for a dimension-{} measure", x.len(), mu.dim())));
    }
    if x.iter().all(|v| *v == 0.0) || x.iter().any(|v| !v.is_finite()) {
        return Err(KlsError::InvalidInput("gauge needs a finite non-zero point".into()));
    }
    Ok(())
}

/// `‖x‖_{K_μ}` by adaptive radial quadrature, whatever the measure.
///
/// `h(r) = r^{n-1} f(r x)` is log-concave; beyond its mode, once two points
/// `r_a < r_b` show a decay slope `c`, `∫_{r_b}^∞ h <= h(r_b) / c`, which
/// certifies the truncation.
pub fn kmu_gauge_quadrature(mu: &LogConcaveMeasure, x: &[f64]) -> Result<f64> {
    check_direction(mu, x)?;
    let n = mu.dim() as f64;
    let log_h = |r: f64| -> f64 {
        if r <= 0.0 {
            return if n == 1.0 { mu.log_density(&vec![0.0; x.len()]) } else { f64::NEG_INFINITY };
        }
        let y: Vec<f64> = x.iter().map(|v| r * v).collect();
        (n - 1.0) * r.ln() + mu.log_density(&y)
    };
    // Support end along the ray: f(r x) > 0 exactly on [0, r_s).
    let mut r_s = f64::INFINITY;
    let mut probe = 1.0;
    while probe < 1e12 {
        if !mu.log_density(&x.iter().map(|v| probe * v).collect::<Vec<_>>()).is_finite() {
            let (mut lo, mut hi) = (0.0, probe);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mu.log_density(&x.iter().map(|v| mid * v).collect::<Vec<_>>()).is_finite() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            r_s = lo;
            break;
        }
        probe *= 2.0;
    }
    // Mode of h by golden section on a bracket found by doubling.
    let upper = if r_s.is_finite() {
        r_s
    } else {
        let mut b = 1.0;
        while log_h(2.0 * b) > log_h(b) {
            b *= 2.0;
            if b > 1e12 {
                return Err(KlsError::InvalidMeasure("radial integral diverges: density does not decay".into()));
            }
        }
        2.0 * b
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, upper);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if log_h(c) >= log_h(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-12 * upper {
            break;
        }
    }
    let r0 = 0.5 * (a + b);
    let l0 = log_h(r0).max(log_h(upper.min(r_s) * (1.0 - 1e-15)));
    if !l0.is_finite() {
        return Err(KlsError::InvalidMeasure("density vanishes along the ray".into()));
    }
    let scaled = |r: f64| (log_h(r) - l0).exp();
    let mut total = 0.0;
    let mut left = 0.0;
    let mut step = r0.max(1e-3 * upper);
    loop {
        let right = (left + step).min(r_s);
        total += adaptive_gk15(scaled, left, right, 0.0, 0.1 * GAUGE_RTOL)?.value;
        if right >= r_s {
            break;
        }
        if right > r0 {
            let (la, lb) = (log_h(0.5 * (left + right).max(r0)), log_h(right));
            let slope = (la - lb) / (right - 0.5 * (left + right).max(r0));
            if slope > 0.0 && (lb - l0).exp() / slope <= TAIL_FRACTION * total {
                break;
            }
        }
        left = right;
        step *= 2.0;
        if left > 1e12 {
            return Err(KlsError::InvalidMeasure("radial integral diverges".into()));
        }
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(KlsError::InvalidMeasure("radial integral is not positive and finite".into()));
    }
    // (n ∫ h)^{-1/n} with ∫ h = total · e^{l0}.
    Ok((-((n * total).ln() + l0) / n).exp())
}

/// The body `K_μ` (closed forms as built-in bodies; otherwise a gauge-only
/// body driven by the quadrature gauge).
pub fn kmu_body(mu: &LogConcaveMeasure) -> Result<ConvexBody> {
    let n = mu.dim();
    match mu {
        LogConcaveMeasure::MuP { p, .. } => ConvexBody::lp_ball(n, *p, c_pn(*p, n)?),
        LogConcaveMeasure::Gaussian { .. } => ConvexBody::ball(n, gaussian_kmu_radius(n)),
        LogConcaveMeasure::UniformBody(b) => b.volume_normalized(),
        LogConcaveMeasure::Custom1dProduct { .. } => {
            let owned = mu.clone();
            // A product of a symmetric law gives an unconditional body, which
            // sits inside the box spanned by its axis radii; the factor 2
            // leaves room for asymmetric laws.
            let mut axis = 0.0f64;
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[0] = s;
                axis = axis.max(1.0 / kmu_gauge_quadrature(mu, &e)?);
            }
            let outer = 2.0 * (n as f64).sqrt() * axis;
            ConvexBody::generic(
                n,
                GenericGauge {
                    name: mu.label(),
                    gauge: Arc::new(move |x: &[f64]| {
                        if x.iter().all(|v| *v == 0.0) {
                            0.0
                        } else {
                            kmu_gauge_quadrature(&owned, x).unwrap_or(f64::NAN)
                        }
                    }),
                    outer_radius: outer,
                    strictly_convex: false,
                },
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeRule {
    ClosedForm,
    MonteCarlo(McPlan),
    /// Sphere grid with `m` nodes per coordinate (n <= 3).
    Quadrature(usize),
}

/// `|K_μ| = |B_2^n| E_θ[‖θ‖_{K_μ}^{-n}]` over uniform directions `θ`.
pub fn check_volume_one(mu: &LogConcaveMeasure, rule: VolumeRule) -> Result<MomentReport> {
    let n = mu.dim();
    if n < 2 {
        return Err(KlsError::InvalidParameter("K_mu volume check needs n >= 2".into()));
    }
    let ln_b = ln_unit_ball_volume(n);
    let nf = n as f64;
    match rule {
        VolumeRule::ClosedForm => {
            let body = match mu {
                LogConcaveMeasure::Custom1dProduct { .. } => {
                    return Err(KlsError::Unsupported("no closed form for a custom product law".into()))
                }
                // The radial integral is g(x)^{-n} / |K|, so |K_μ| = |K| / |K|.
                LogConcaveMeasure::UniformBody(_) => return Ok(MomentReport::exact(1.0)),
                _ => kmu_body(mu)?,
            };
            Ok(MomentReport::exact(body.ln_volume()?.exp()))
        }
        VolumeRule::Quadrature(m) => {
            let grid = SphereGrid::new(n, m)?;
            let mut total = 0.0;
            for (u, w) in grid.points.iter().zip(&grid.weights) {
                total += w * kmu_gauge(mu, u)?.powf(-nf);
            }
            Ok(MomentReport::exact(total / nf))
        }
        VolumeRule::MonteCarlo(plan) => {
            let sums = batched_sums(&plan, 1, |rng, count, emit| {
                let mut u = vec![0.0; n];
                for _ in 0..count {
                    for v in u.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    let r = norm(&u);
                    u.iter_mut().for_each(|v| *v /= r);
                    emit(&[kmu_gauge(mu, &u)?.powf(-nf)]);
                }
                Ok(())
            })?;
            let scale = ln_b.exp();
            Ok(sums.report(|m| scale * m[0]))
        }
    }
}

/// Barycenters within this distance of the origin count as centred.
pub const BARYCENTER_TOL: f64 = 1e-8;

/// `M / (e^n f(0))`, at most 1 for centred log-concave laws.
pub fn fradelizi_check(mu: &LogConcaveMeasure) -> Result<f64> {
    let bary = mu.barycenter()?;
    let off = norm(&bary);
    if off > BARYCENTER_TOL {
        return Err(KlsError::Precondition(format!("barycenter is {off:.3e} away from the origin")));
    }
    let n = mu.dim() as f64;
    Ok((mu.max_density()?.ln() - n - mu.f_at_origin().ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpCheck {
    pub k_p1: f64,
    pub k_p2: f64,
    pub sup: f64,
    /// `k_{p1} / M^{1/p1}`.
    pub lhs: f64,
    /// `k_{p2} / M^{1/p2}`.
    pub rhs: f64,
    pub holds: bool,
}

/// `k_p = (p ∫_0^∞ r^{p-1} f(r) dr)^{1/p}` and `M = sup f` for a nonnegative
/// profile, with the breakpoints of `f` (if any) passed in `breaks`.
fn k_p(f: &dyn Fn(f64) -> f64, p: f64, breaks: &[f64]) -> Result<f64> {
    let mut edges: Vec<f64> = vec![0.0];
    edges.extend(breaks.iter().copied().filter(|b| *b > 0.0));
    edges.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive_gk15(|r| r.powf(p - 1.0) * f(r), w[0], w[1], 0.0, 1e-12)?.value;
    }
    let start = *edges.last().expect("non-empty");
    let tail = crate::quadrature::adaptive_half_line(|s| (start + s).powf(p - 1.0) * f(start + s), 0.0, 1e-12)
        .map_err(|_| KlsError::InvalidInput(format!("k_{p} integral does not converge")))?
        .value;
    total += tail;
    if !total.is_finite() {
        return Err(KlsError::InvalidInput(format!("k_{p} integral diverges")));
    }
    Ok((p * total).powf(1.0 / p))
}

/// Checks `k_{p1}/M^{1/p1} <= k_{p2}/M^{1/p2}` for `0 < p1 <= p2`. `breaks`
/// lists points where the profile may jump or kink.
pub fn kp_ratio_check(f: &dyn Fn(f64) -> f64, p1: f64, p2: f64, breaks: &[f64]) -> Result<KpCheck> {
    if !(p1 > 0.0) || !(p2 >= p1) {
        return Err(KlsError::InvalidInput(format!("need 0 < p1 <= p2, got {p1}, {p2}")));
    }
    let k1 = k_p(f, p1, breaks)?;
    let k2 = k_p(f, p2, breaks)?;
    // Supremum: dense scan on the effective support, then golden refinement.
    let reach = breaks.iter().copied().fold(1.0f64, f64::max) * 4.0 + k2 * 4.0;
    let grid = 4096;
    let mut best = (0.0, f(0.0));
    for i in 1..=grid {
        let r = reach * i as f64 / grid as f64;
        let v = f(r);
        if v > best.1 {
            best = (r, v);
        }
    }
    let h = reach / grid as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), best.0 + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let sup = best.1.max(f(0.5 * (a + b)));
    if !(sup > 0.0) {
        return Err(KlsError::InvalidInput("profile vanishes identically".into()));
    }
    let lhs = k1 / sup.powf(1.0 / p1);
    let rhs = k2 / sup.powf(1.0 / p2);
    Ok(KpCheck { k_p1: k1, k_p2: k2, sup, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) })
}
