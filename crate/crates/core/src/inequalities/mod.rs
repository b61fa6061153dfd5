//! Checkers for Hardy, Faber–Krahn, isoperimetric and Colesanti-type
//! inequalities with explicit constants, plus ratio evaluators for bounds
//! whose universal constants are unknown.
//!
//! Every checker integrates along rays `x = r y` (see
//! [`crate::measures::rays`]), so the same per-ray integrands serve Monte
//! Carlo runs and deterministic quadrature in `n <= 3`. Uniform, cone and
//! surface terms of one report come from the same rays. Checkers evaluate a
//! batch of test functions on one stream of rays.

pub mod functions;
pub mod suite;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::body::{BodyKind, ConvexBody};
use crate::error::{KlsError, Result};
use crate::linalg::{dot, norm, sym_eigen};
use crate::measures::rays::direction_grid;
use crate::measures::{ray_moments, stream_id, McPlan, MomentReport, RayMoments, RayScheme, Region};
use crate::special::{bessel_j_first_zero, unit_ball_volume};

pub use functions::{corpus, family_corpus, orthant_corpus, Family, TestFunction, Vanishing, FUNCTIONS_PER_FAMILY};

/// Radial Gauss nodes for integrands singular at the origin.
pub const RB_NODES: usize = 16;
pub const QUAD_NODES: usize = 16;
/// Absolute tolerance of quadrature verdicts.
pub const QUAD_TOL: f64 = 1e-8;
/// Relative floor absorbing roundoff in equality cases.
pub const ROUNDOFF: f64 = 1e-12;
pub const Z_TOL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// `Var_λ f <= (4/n²) ∫<x,∇f>² dλ + 2 Var_σ f`.
    HardyBoundary,
    /// Faber–Krahn form with a boundary variance term.
    FaberKrahnBoundary,
    /// `∫ f² <= (4/n²) inf_{x0} ∫ |x - x0|² |∇f|²` for `f` vanishing on `∂Ω`.
    ClassicalHardy,
    /// `∫ f² <= P^D(Ω*) ∫ |∇f|²` for `f` vanishing on `∂Ω`.
    FaberKrahn,
    /// Mean-curvature weighted Hardy inequality.
    MeanCurvatureHardy,
    /// `∫ f²/|x|² <= (4/n²) ∫ |∇f|²` on an orthant piece, `f = 0` on the hyperplanes.
    OrthantHardy,
    /// `∫ f²/|x|² <= (2/(n-2))² ∫ |∇f|²` for `f` vanishing on `∂Ω`.
    OriginHardy,
    Isoperimetry,
    Colesanti,
    /// `A |∂Ω|/|Ω| >= n/(n-1)` with `A = ∫ dσ / H`.
    CurvatureJensen,
}

impl TheoremId {
    pub const ALL: [TheoremId; 10] = [
        TheoremId::HardyBoundary,
        TheoremId::FaberKrahnBoundary,
        TheoremId::ClassicalHardy,
        TheoremId::FaberKrahn,
        TheoremId::MeanCurvatureHardy,
        TheoremId::OrthantHardy,
        TheoremId::OriginHardy,
        TheoremId::Isoperimetry,
        TheoremId::Colesanti,
        TheoremId::CurvatureJensen,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::HardyBoundary => "hardy_boundary",
            TheoremId::FaberKrahnBoundary => "faber_krahn_boundary",
            TheoremId::ClassicalHardy => "classical_hardy",
            TheoremId::FaberKrahn => "faber_krahn",
            TheoremId::MeanCurvatureHardy => "mean_curvature_hardy",
            TheoremId::OrthantHardy => "orthant_hardy",
            TheoremId::OriginHardy => "origin_hardy",
            TheoremId::Isoperimetry => "isoperimetry",
            TheoremId::Colesanti => "colesanti",
            TheoremId::CurvatureJensen => "curvature_jensen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    RatioOnly,
}

/// How the integrals of a checker are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    MonteCarlo(McPlan),
    /// Boundary grid with `m` nodes per coordinate and `nodes` radial nodes (n <= 3).
    Quadrature { m: usize, nodes: usize },
}

impl Method {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Method::MonteCarlo(McPlan::new(samples, seed))
    }

    pub fn quadrature(m: usize) -> Self {
        Method::Quadrature { m, nodes: QUAD_NODES }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Method::Quadrature { .. })
    }

    /// Ray scheme in the seed namespace of `(id, region)`; `singular` asks for
    /// radial quadrature along sampled directions.
    fn scheme(&self, id: TheoremId, region: &Region, singular: bool) -> RayScheme {
        match *self {
            Method::MonteCarlo(plan) => {
                let plan = plan.with_stream(plan.stream ^ stream_id(&format!("{}/{}", id.as_str(), region.label())));
                if singular {
                    RayScheme::rao_blackwell(plan, RB_NODES)
                } else {
                    RayScheme::monte_carlo(plan)
                }
            }
            Method::Quadrature { m, nodes } => RayScheme::quadrature(m, nodes),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Method::MonteCarlo(p) => Some(p.seed),
            Method::Quadrature { .. } => None,
        }
    }

    fn samples(&self) -> Option<usize> {
        match self {
            Method::MonteCarlo(p) => Some(p.samples),
            Method::Quadrature { .. } => None,
        }
    }
}

/// How a verdict is decided from the slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tolerance {
    Statistical,
    Quadrature,
    Exact,
}

impl Tolerance {
    fn of(method: &Method) -> Self {
        if method.is_deterministic() {
            Tolerance::Quadrature
        } else {
            Tolerance::Statistical
        }
    }

    fn rule(&self) -> &'static str {
        match self {
            Tolerance::Statistical => "slack >= -(3 stderr + 1e-12 (|lhs| + |rhs|))",
            Tolerance::Quadrature => "slack >= -1e-8",
            Tolerance::Exact => "slack >= -1e-12 (|lhs| + |rhs|)",
        }
    }

    fn allowance(&self, slack: &MomentReport, lhs: f64, rhs: f64) -> f64 {
        let floor = ROUNDOFF * (lhs.abs() + rhs.abs());
        match self {
            Tolerance::Statistical => Z_TOL * slack.stderr + floor,
            Tolerance::Quadrature => QUAD_TOL,
            Tolerance::Exact => floor,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub theorem_id: TheoremId,
    pub body: String,
    pub function: String,
    pub lhs: MomentReport,
    pub rhs_terms: BTreeMap<String, MomentReport>,
    /// `Σ rhs_terms - lhs`.
    pub slack: MomentReport,
    pub verdict: Verdict,
    pub tolerance_rule: String,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn rhs(&self) -> f64 {
        self.rhs_terms.values().map(|t| t.estimate).sum()
    }

    /// Re-decides a Monte Carlo verdict with `z` standard errors in place of
    /// the default three. Other tolerance rules are left alone.
    pub fn rejudge(&mut self, z: f64) {
        if self.tolerance_rule != Tolerance::Statistical.rule() || self.verdict == Verdict::RatioOnly {
            return;
        }
        let floor = ROUNDOFF * (self.lhs.estimate.abs() + self.rhs().abs());
        let ok = self.slack.estimate >= -(z * self.slack.stderr + floor);
        self.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        self.tolerance_rule = format!("slack >= -({z} stderr + 1e-12 (|lhs| + |rhs|))");
    }

    /// Flat record: theorem, body, function, every term, slack, verdict, seed and N.
    pub fn to_record(&self) -> serde_json::Value {
        let term = |m: &MomentReport| serde_json::json!({ "estimate": m.estimate, "stderr": m.stderr });
        let mut terms = serde_json::Map::new();
        terms.insert("lhs".into(), term(&self.lhs));
        for (k, v) in &self.rhs_terms {
            terms.insert(k.clone(), term(v));
        }
        serde_json::json!({
            "theorem_id": self.theorem_id.as_str(),
            "body": self.body,
            "function": self.function,
            "terms": terms,
            "slack": term(&self.slack),
            "verdict": self.verdict,
            "seed": self.seed,
            "N": self.samples,
        })
    }
}

type Phi<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

struct ReportSpec<'a> {
    id: TheoremId,
    body: String,
    function: String,
    tolerance: Tolerance,
    method: Option<&'a Method>,
}

impl ReportSpec<'_> {
    /// Evaluates `lhs` and the named `terms` on the ray means and decides the verdict.
    fn build(self, mom: &RayMoments, lhs: Phi<'_>, terms: Vec<(&str, Phi<'_>)>) -> InequalityReport {
        let lhs_r = mom.report(&lhs);
        let rhs_terms: BTreeMap<String, MomentReport> =
            terms.iter().map(|(k, phi)| (k.to_string(), mom.report(phi))).collect();
        let slack = mom.report(|m| terms.iter().map(|(_, phi)| phi(m)).sum::<f64>() - lhs(m));
        let rhs: f64 = rhs_terms.values().map(|t| t.estimate).sum();
        let ok = slack.estimate >= -self.tolerance.allowance(&slack, lhs_r.estimate, rhs);
        InequalityReport {
            theorem_id: self.id,
            body: self.body,
            function: self.function,
            lhs: lhs_r,
            rhs_terms,
            slack,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            tolerance_rule: self.tolerance.rule().into(),
            seed: self.method.and_then(|m| m.seed()),
            samples: self.method.and_then(|m| m.samples()),
            diagnostics: BTreeMap::new(),
        }
    }
}

fn spec<'a>(id: TheoremId, region: &Region, f: &TestFunction, method: &'a Method) -> ReportSpec<'a> {
    ReportSpec {
        id,
        body: region.label(),
        function: f.name.clone(),
        tolerance: Tolerance::of(method),
        method: Some(method),
    }
}

/// `|Ω|^{1/n} / |B_2^n|^{1/n}`, the radius of the volume-matched ball.
fn volume_radius(body: &ConvexBody) -> Result<f64> {
    let n = body.dim() as f64;
    Ok(((body.ln_volume()? - unit_ball_volume(body.dim()).ln()) / n).exp())
}

/// Mean curvature `tr II` at the boundary point `y`.
pub fn mean_curvature(body: &ConvexBody, y: &[f64]) -> Result<f64> {
    let n = body.dim();
    if let BodyKind::Ball { radius } = body.kind() {
        return Ok((n as f64 - 1.0) / radius);
    }
    let grad = body.gauge_gradient(y)?;
    let hess = body.gauge_hessian(y)?;
    let gn = norm(&grad);
    // Trace over the tangent space: tr(Hess) - <ν, Hess ν>.
    let nu = DVector::from_iterator(n, grad.iter().map(|v| v / gn));
    Ok((hess.trace() - nu.dot(&(&hess * &nu))) / gn)
}

/// Smallest principal curvature at the boundary point `y`.
pub fn min_curvature(body: &ConvexBody, y: &[f64]) -> Result<f64> {
    if let BodyKind::Ball { radius } = body.kind() {
        return Ok(1.0 / radius);
    }
    Ok(body.principal_curvatures(y)?[0])
}

fn require_curved(body: &ConvexBody) -> Result<()> {
    if !(body.smooth_boundary() && body.strictly_convex()) {
        return Err(KlsError::UnsupportedCurvature(format!(
            "{} is not smooth and strictly convex",
            body.label()
        )));
    }
    Ok(())
}

/// Curvature at `y`, or `None` where the oracle is inadmissible.
fn admissible_curvature(body: &ConvexBody, y: &[f64]) -> Result<Option<f64>> {
    match mean_curvature(body, y) {
        Ok(h) if h.is_finite() && h > 0.0 => Ok(Some(h)),
        Ok(_) | Err(KlsError::NonSmoothPoint(_)) | Err(KlsError::UnsupportedCurvature(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn shifts(funcs: &[TestFunction], n: usize) -> Vec<f64> {
    let origin = vec![0.0; n];
    funcs.iter().map(|f| f.eval(&origin)).collect()
}

/// Hardy inequality with a cone-variance boundary term, for each function.
///
/// Terms: `radial_energy = (4/n²) ∫<x,∇f>² dλ`, `cone_variance = 2 Var_σ f`.
pub fn check_hardy_boundary_many(body: &ConvexBody, funcs: &[TestFunction], method: &Method) -> Result<Vec<InequalityReport>> {
    const K: usize = 5;
    let id = TheoremId::HardyBoundary;
    let region = Region::whole(body.clone());
    let n = body.dim();
    let c = shifts(funcs, n);
    let mom = ray_moments(&region, &method.scheme(id, &region, false), K * funcs.len(), |y, nodes, out| {
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        for (j, f) in funcs.iter().enumerate() {
            let o = &mut out[K * j..K * (j + 1)];
            for &(r, w) in nodes {
                x.iter_mut().zip(y).for_each(|(xi, yi)| *xi = r * yi);
                let v = f.eval(&x) - c[j];
                (f.gradient)(&x, &mut g);
                let xg = dot(&x, &g);
                o[0] += w * v;
                o[1] += w * v * v;
                o[2] += w * xg * xg;
            }
            let v = f.eval(y) - c[j];
            o[3] += v;
            o[4] += v * v;
        }
        Ok(())
    })?;
    let nf = n as f64;
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let b = K * j;
            spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[b + 1] - m[b] * m[b]),
                vec![
                    ("radial_energy", Box::new(move |m| 4.0 / (nf * nf) * m[b + 2])),
                    ("cone_variance", Box::new(move |m| 2.0 * (m[b + 4] - m[b + 3] * m[b + 3]))),
                ],
            )
        })
        .collect())
}

pub fn check_hardy_boundary(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_hardy_boundary_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// Faber–Krahn inequality with a boundary variance term:
/// `Var_λ f <= 4|Ω|^{2/n}/(n²|B|^{2/n}) ∫|∇f|² + 2 I Var_{λ_∂Ω} f`, where `I`
/// is the isoperimetric ratio.
pub fn check_faber_krahn_boundary_many(
    body: &ConvexBody,
    funcs: &[TestFunction],
    method: &Method,
) -> Result<Vec<InequalityReport>> {
    const K: usize = 5;
    let id = TheoremId::FaberKrahnBoundary;
    let region = Region::whole(body.clone());
    let n = body.dim();
    let nf = n as f64;
    let c = shifts(funcs, n);
    // Slot 0 holds |∇g(y)| = 1/<y, ν>, the density of λ_∂Ω against σ up to normalization.
    let mom = ray_moments(&region, &method.scheme(id, &region, false), 1 + K * funcs.len(), |y, nodes, out| {
        let gy = norm(&body.gauge_gradient_ae(y));
        out[0] = gy;
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        for (j, f) in funcs.iter().enumerate() {
            let o = &mut out[1 + K * j..1 + K * (j + 1)];
            for &(r, w) in nodes {
                x.iter_mut().zip(y).for_each(|(xi, yi)| *xi = r * yi);
                let v = f.eval(&x) - c[j];
                (f.gradient)(&x, &mut g);
                o[0] += w * v;
                o[1] += w * v * v;
                o[2] += w * dot(&g, &g);
            }
            let v = f.eval(y) - c[j];
            o[3] += gy * v;
            o[4] += gy * v * v;
        }
        Ok(())
    })?;
    let rho = volume_radius(body)?;
    let c1 = 4.0 * rho * rho / (nf * nf);
    // I = E_σ|∇g| (|Ω|/|B|)^{1/n}; the closed form is used when available.
    let closed_i = body.isoperimetric_ratio().ok();
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let b = 1 + K * j;
            let iso = move |m: &[f64]| closed_i.unwrap_or(m[0] * rho);
            spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[b + 1] - m[b] * m[b]),
                vec![
                    ("gradient_energy", Box::new(move |m| c1 * m[b + 2])),
                    (
                        "surface_variance",
                        Box::new(move |m| {
                            let mean = m[b + 3] / m[0];
                            2.0 * iso(m) * (m[b + 4] / m[0] - mean * mean)
                        }),
                    ),
                ],
            )
        })
        .collect())
}

pub fn check_faber_krahn_boundary(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_faber_krahn_boundary_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// Centers tried in the classical Hardy inequality: the origin (which is
/// the barycenter of every built-in body) and `±δ e_i` with `δ = r_in / 4`.
pub fn hardy_centers(body: &ConvexBody) -> Result<Vec<Vec<f64>>> {
    let n = body.dim();
    let delta = 0.25 * body.in_radius()?;
    let mut out = vec![vec![0.0; n]];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut x0 = vec![0.0; n];
            x0[i] = s * delta;
            out.push(x0);
        }
    }
    Ok(out)
}

fn check_all_vanish(region: &Region, funcs: &[TestFunction], method: &Method) -> Result<()> {
    let seed = method.seed().unwrap_or(0);
    funcs.iter().try_for_each(|f| f.check_vanishing(region, seed))
}

/// `∫ f² <= (4/n²) min_{x0} ∫ |x - x0|² |∇f|²` over [`hardy_centers`], for
/// functions vanishing on `∂Ω`. The chosen center index is recorded as the
/// `center` diagnostic.
pub fn check_classical_hardy_many(body: &ConvexBody, funcs: &[TestFunction], method: &Method) -> Result<Vec<InequalityReport>> {
    let id = TheoremId::ClassicalHardy;
    let region = Region::whole(body.clone());
    check_all_vanish(&region, funcs, method)?;
    let n = body.dim();
    let nf = n as f64;
    let centers = hardy_centers(body)?;
    let k = 1 + centers.len();
    let mom = ray_moments(&region, &method.scheme(id, &region, false), k * funcs.len(), |y, nodes, out| {
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        for (j, f) in funcs.iter().enumerate() {
            let o = &mut out[k * j..k * (j + 1)];
            for &(r, w) in nodes {
                x.iter_mut().zip(y).for_each(|(xi, yi)| *xi = r * yi);
                let v = f.eval(&x);
                (f.gradient)(&x, &mut g);
                let g2 = dot(&g, &g);
                o[0] += w * v * v;
                for (slot, x0) in o[1..].iter_mut().zip(&centers) {
                    let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                    *slot += w * d2 * g2;
                }
            }
        }
        Ok(())
    })?;
    let means = mom.means();
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let b = k * j;
            let best = (1..k)
                .min_by(|&a, &c| means[b + a].total_cmp(&means[b + c]))
                .expect("at least one center");
            let mut rep = spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[b]),
                vec![("weighted_energy", Box::new(move |m| 4.0 / (nf * nf) * m[b + best]))],
            );
            rep.diagnostics.insert("center".into(), (best - 1) as f64);
            rep
        })
        .collect())
}

pub fn check_classical_hardy(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_classical_hardy_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// `P^D` of the ball with the volume of `body`: `ρ² / j_{n/2-1,1}²`.
pub fn faber_krahn_constant(body: &ConvexBody) -> Result<f64> {
    let rho = volume_radius(body)?;
    let j = bessel_j_first_zero(body.dim() as f64 / 2.0 - 1.0)?;
    Ok(rho * rho / (j * j))
}

/// `∫ f² <= P^D(Ω*) ∫ |∇f|²` for functions vanishing on `∂Ω`.
pub fn check_faber_krahn_many(body: &ConvexBody, funcs: &[TestFunction], method: &Method) -> Result<Vec<InequalityReport>> {
    let id = TheoremId::FaberKrahn;
    let region = Region::whole(body.clone());
    check_all_vanish(&region, funcs, method)?;
    let pd = faber_krahn_constant(body)?;
    let mom = energy_moments(&region, funcs, method, id, false, |_| 1.0)?;
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[2 * j]),
                vec![("gradient_energy", Box::new(move |m| pd * m[2 * j + 1]))],
            )
        })
        .collect())
}

pub fn check_faber_krahn(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_faber_krahn_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// Means of `weight(x) f²` and `|∇f|²` for each function.
fn energy_moments(
    region: &Region,
    funcs: &[TestFunction],
    method: &Method,
    id: TheoremId,
    singular: bool,
    weight: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<RayMoments> {
    let n = region.dim();
    ray_moments(region, &method.scheme(id, region, singular), 2 * funcs.len(), |y, nodes, out| {
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        for &(r, w) in nodes {
            x.iter_mut().zip(y).for_each(|(xi, yi)| *xi = r * yi);
            let wx = w * weight(&x);
            for (j, f) in funcs.iter().enumerate() {
                let v = f.eval(&x);
                (f.gradient)(&x, &mut g);
                out[2 * j] += wx * v * v;
                out[2 * j + 1] += w * dot(&g, &g);
            }
        }
        Ok(())
    })
}

/// Checks that outer normals at seeded boundary points of `K ∩ Q` have no
/// negative coordinate.
fn check_nonnegative_normals(region: &Region, seed: u64) -> Result<()> {
    let body = &region.body;
    let n = body.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream_id("normals"));
    for _ in 0..functions::VANISHING_CHECKS {
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v.abs()).collect();
        let g = body.gauge_unchecked(&u);
        let y: Vec<f64> = u.iter().map(|v| v / g).collect();
        let nu = body.gauge_gradient_ae(&y);
        if let Some(v) = nu.iter().find(|v| **v < -1e-12) {
            return Err(KlsError::Precondition(format!(
                "outer normal at {y:?} has a negative coordinate {v:e}"
            )));
        }
    }
    Ok(())
}

/// `∫_{K∩Q} f²/|x|² <= (4/n²) ∫_{K∩Q} |∇f|²` for an unconditional `K` and
/// functions vanishing on the coordinate hyperplanes.
pub fn check_unconditional_hardy_many(
    body: &ConvexBody,
    funcs: &[TestFunction],
    method: &Method,
) -> Result<Vec<InequalityReport>> {
    let id = TheoremId::OrthantHardy;
    let region = Region::orthant(body.clone())?;
    check_nonnegative_normals(&region, method.seed().unwrap_or(0))?;
    check_all_vanish(&region, funcs, method)?;
    let nf = body.dim() as f64;
    let mom = energy_moments(&region, funcs, method, id, false, |x| 1.0 / dot(x, x))?;
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[2 * j]),
                vec![("gradient_energy", Box::new(move |m| 4.0 / (nf * nf) * m[2 * j + 1]))],
            )
        })
        .collect())
}

pub fn check_unconditional_hardy(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_unconditional_hardy_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// `∫ f²/|x|² <= (2/(n-2))² ∫ |∇f|²` for `n >= 3` and functions vanishing on `∂Ω`.
pub fn check_origin_hardy_many(body: &ConvexBody, funcs: &[TestFunction], method: &Method) -> Result<Vec<InequalityReport>> {
    let id = TheoremId::OriginHardy;
    let n = body.dim();
    if n < 3 {
        return Err(KlsError::InvalidInput(format!("origin Hardy inequality needs n >= 3, got {n}")));
    }
    let region = Region::whole(body.clone());
    check_all_vanish(&region, funcs, method)?;
    let c = (2.0 / (n as f64 - 2.0)).powi(2);
    let mom = energy_moments(&region, funcs, method, id, true, |x| 1.0 / dot(x, x))?;
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[2 * j]),
                vec![("gradient_energy", Box::new(move |m| c * m[2 * j + 1]))],
            )
        })
        .collect())
}

/// `∫ (H/‖x‖) f² <= 4 ∫ (‖x‖/H) <∇f, ν(x/‖x‖)>² + 2 ∫_∂Ω f² dH^{n-1}`, all
/// divided by `|Ω|`. Directions where the curvature oracle is inadmissible
/// are dropped; their share is the `rejected_fraction` diagnostic.
pub fn check_mean_curvature_hardy_many(
    body: &ConvexBody,
    funcs: &[TestFunction],
    method: &Method,
) -> Result<Vec<InequalityReport>> {
    const K: usize = 3;
    let id = TheoremId::MeanCurvatureHardy;
    require_curved(body)?;
    let region = Region::whole(body.clone());
    let n = body.dim();
    let nf = n as f64;
    // 1/r² has infinite variance under n r^{n-1} dr for n = 2.
    let scheme = method.scheme(id, &region, n <= 2);
    let mom = ray_moments(&region, &scheme, 1 + K * funcs.len(), |y, nodes, out| {
        let Some(h) = admissible_curvature(body, y)? else {
            return Ok(());
        };
        out[0] = 1.0;
        let grad_g = body.gauge_gradient(y)?;
        let gy = norm(&grad_g);
        let nu: Vec<f64> = grad_g.iter().map(|v| v / gy).collect();
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        for (j, f) in funcs.iter().enumerate() {
            let o = &mut out[1 + K * j..1 + K * (j + 1)];
            for &(r, w) in nodes {
                x.iter_mut().zip(y).for_each(|(xi, yi)| *xi = r * yi);
                let v = f.eval(&x);
                (f.gradient)(&x, &mut g);
                let gn = dot(&g, &nu);
                o[0] += w * h / r * v * v;
                o[1] += w * r / h * gn * gn;
            }
            let v = f.eval(y);
            o[2] += gy * v * v;
        }
        Ok(())
    })?;
    let rejected = 1.0 - mom.means()[0];
    Ok(funcs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let b = 1 + K * j;
            let mut rep = spec(id, &region, f, method).build(
                &mom,
                Box::new(move |m| m[b] / m[0]),
                vec![
                    ("curvature_energy", Box::new(move |m| 4.0 * m[b + 1] / m[0])),
                    // (1/|Ω|) ∫_∂Ω f² = n E_σ[|∇g| f²]
                    ("boundary_mass", Box::new(move |m| 2.0 * nf * m[b + 2] / m[0])),
                ],
            );
            rep.diagnostics.insert("rejected_fraction".into(), rejected);
            rep
        })
        .collect())
}

pub fn check_mean_curvature_hardy(body: &ConvexBody, f: &TestFunction, method: &Method) -> Result<InequalityReport> {
    Ok(check_mean_curvature_hardy_many(body, std::slice::from_ref(f), method)?.remove(0))
}

/// One side-by-side identity check.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: MomentReport,
    pub rhs: MomentReport,
    pub difference: MomentReport,
    pub holds: bool,
    pub tolerance_rule: String,
}

/// The curvature identities behind the mean-curvature Hardy inequality:
/// `∫ (H/‖x‖) dλ = |∂Ω|/|Ω|`, `∫ (H/‖x‖) dλ = n/(n-1) ∫ H dσ` and
/// `∫ (‖x‖/H) dλ = n/(n+1) ∫ dσ/H`.
pub fn mean_curvature_identities(body: &ConvexBody, method: &Method) -> Result<Vec<IdentityCheck>> {
    let id = TheoremId::MeanCurvatureHardy;
    require_curved(body)?;
    let region = Region::whole(body.clone());
    let n = body.dim();
    let nf = n as f64;
    let scheme = method.scheme(id, &region, n <= 2);
    let mom = ray_moments(&region, &scheme, 6, |y, nodes, out| {
        let Some(h) = admissible_curvature(body, y)? else {
            return Ok(());
        };
        out[0] = 1.0;
        for &(r, w) in nodes {
            out[1] += w * h / r;
            out[3] += w * r / h;
        }
        out[2] = h;
        out[4] = 1.0 / h;
        out[5] = norm(&body.gauge_gradient_ae(y));
        Ok(())
    })?;
    let area_ratio: Phi = match body.surface_area() {
        Ok(s) => {
            let v = body.volume()?;
            Box::new(move |_| s / v)
        }
        Err(_) => Box::new(move |m| nf * m[5] / m[0]),
    };
    let tol = Tolerance::of(method);
    let pairs: Vec<(&str, Phi, Phi)> = vec![
        ("curvature_over_gauge=area_ratio", Box::new(|m| m[1] / m[0]), area_ratio),
        (
            "curvature_over_gauge=cone_mean_curvature",
            Box::new(|m| m[1] / m[0]),
            Box::new(move |m| nf / (nf - 1.0) * m[2] / m[0]),
        ),
        (
            "gauge_over_curvature=cone_inverse_curvature",
            Box::new(|m| m[3] / m[0]),
            Box::new(move |m| nf / (nf + 1.0) * m[4] / m[0]),
        ),
    ];
    Ok(pairs
        .into_iter()
        .map(|(name, l, r)| {
            let lhs = mom.report(&l);
            let rhs = mom.report(&r);
            let difference = mom.report(|m| l(m) - r(m));
            let allowance = match tol {
                Tolerance::Statistical => Z_TOL * difference.stderr + ROUNDOFF * (lhs.estimate.abs() + rhs.estimate.abs()),
                _ => QUAD_TOL,
            };
            IdentityCheck {
                name: name.into(),
                lhs,
                rhs,
                holds: difference.estimate.abs() <= allowance,
                difference,
                tolerance_rule: match tol {
                    Tolerance::Statistical => "|difference| <= 3 stderr + 1e-12 (|lhs| + |rhs|)".into(),
                    _ => "|difference| <= 1e-8".into(),
                },
            }
        })
        .collect())
}

/// `|∂Ω| >= n |B|^{1/n} |Ω|^{(n-1)/n}`, with the isoperimetric ratio as the
/// `isoperimetric_ratio` diagnostic.
pub fn check_isoperimetry(body: &ConvexBody) -> Result<InequalityReport> {
    let n = body.dim();
    let nf = n as f64;
    let vol = body.volume()?;
    let area = body.surface_area()?;
    let lhs = nf * unit_ball_volume(n).powf(1.0 / nf) * vol.powf((nf - 1.0) / nf);
    let slack = area - lhs;
    let tol = Tolerance::Exact;
    let slack_r = MomentReport::exact(slack);
    let ok = slack >= -tol.allowance(&slack_r, lhs, area);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("isoperimetric_ratio".into(), body.isoperimetric_ratio()?);
    Ok(InequalityReport {
        theorem_id: TheoremId::Isoperimetry,
        body: body.label(),
        function: String::new(),
        lhs: MomentReport::exact(lhs),
        rhs_terms: BTreeMap::from([("surface_area".to_string(), MomentReport::exact(area))]),
        slack: slack_r,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        tolerance_rule: tol.rule().into(),
        seed: None,
        samples: None,
        diagnostics,
    })
}

/// `∫_∂Ω H f² - ((n-1)/n)(∫_∂Ω f)²/|Ω| <= ∫_∂Ω <II^{-1} ∇_∂ f, ∇_∂ f>` by
/// boundary quadrature with `m` nodes per coordinate, `n ∈ {2, 3}`.
pub fn check_colesanti_many(body: &ConvexBody, funcs: &[TestFunction], m: usize) -> Result<Vec<InequalityReport>> {
    require_curved(body)?;
    let n = body.dim();
    if !(2..=3).contains(&n) {
        return Err(KlsError::Unsupported(format!("boundary quadrature needs n in {{2, 3}}, got {n}")));
    }
    let region = Region::whole(body.clone());
    let nf = n as f64;
    let vol = body.volume()?;
    // ∫_∂Ω h dH^{n-1} = n |Ω| E_σ[|∇g| h]
    let mut sums = vec![[0.0; 3]; funcs.len()];
    let mut g = vec![0.0; n];
    for (y, w) in direction_grid(&region, m)? {
        let grad = body.gauge_gradient(&y)?;
        let gy = norm(&grad);
        let (basis, ii) = body.shape_operator(&y)?;
        let h = ii.trace();
        let chol = ii.cholesky().ok_or_else(|| {
            KlsError::UnsupportedCurvature(format!("second fundamental form is singular at {y:?}"))
        })?;
        let wa = w * gy * nf * vol;
        for (s, f) in sums.iter_mut().zip(funcs) {
            let v = f.eval(&y);
            (f.gradient)(&y, &mut g);
            let t = basis.transpose() * DVector::from_column_slice(&g);
            let energy = t.dot(&chol.solve(&t));
            s[0] += wa * h * v * v;
            s[1] += wa * v;
            s[2] += wa * energy;
        }
    }
    let method = Method::quadrature(m);
    Ok(funcs
        .iter()
        .zip(sums)
        .map(|(f, s)| {
            let lhs = s[0] - (nf - 1.0) / nf * s[1] * s[1] / vol;
            let mom = RayMoments::from_means(vec![lhs, s[2]]);
            let mut rep = spec(TheoremId::Colesanti, &region, f, &method).build(
                &mom,
                Box::new(|m| m[0]),
                vec![("tangential_energy", Box::new(|m| m[1]))],
            );
            rep.diagnostics.insert("curvature_mass".into(), s[0]);
            rep.diagnostics.insert("boundary_integral".into(), s[1]);
            rep
        })
        .collect())
}

pub fn check_colesanti(body: &ConvexBody, f: &TestFunction, m: usize) -> Result<InequalityReport> {
    Ok(check_colesanti_many(body, std::slice::from_ref(f), m)?.remove(0))
}

/// Inputs of the corollary evaluators; any may be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SpectralEstimates {
    pub p_neumann: Option<f64>,
    pub p_lin: Option<f64>,
    /// Lower bound on `P^∞` of the cone measure.
    pub p_infty_cone: Option<f64>,
    /// Lower bound on `P^∞` of the normalized surface measure.
    pub p_infty_surface: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRecord {
    pub name: String,
    pub value: MomentReport,
    pub ratio_to_p_neumann: Option<f64>,
    pub ratio_to_p_lin: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub body: String,
    pub records: Vec<RatioRecord>,
    /// `A |∂Ω|/|Ω| >= n/(n-1)` where curvature is available.
    pub jensen: Option<InequalityReport>,
    pub omissions: Vec<String>,
}

/// Curvature integrals `∫ dσ/H`, `∫ dλ_∂Ω/H`, `∫ dλ_∂Ω/κ` and `|∂Ω|/|Ω|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvatureIntegrals {
    pub cone_inverse_mean: MomentReport,
    pub surface_inverse_mean: MomentReport,
    pub surface_inverse_min: MomentReport,
    pub area_ratio: MomentReport,
}

pub fn curvature_integrals(body: &ConvexBody, method: &Method) -> Result<CurvatureIntegrals> {
    require_curved(body)?;
    let region = Region::whole(body.clone());
    let nf = body.dim() as f64;
    let scheme = match method {
        Method::MonteCarlo(_) => method.scheme(TheoremId::CurvatureJensen, &region, false),
        Method::Quadrature { m, .. } => RayScheme::quadrature(*m, 1),
    };
    let mom = ray_moments(&region, &scheme, 5, |y, _, out| {
        let Some(h) = admissible_curvature(body, y)? else {
            return Ok(());
        };
        let k = min_curvature(body, y)?;
        let gy = norm(&body.gauge_gradient_ae(y));
        out[0] = 1.0;
        out[1] = 1.0 / h;
        out[2] = gy;
        out[3] = gy / h;
        out[4] = gy / k;
        Ok(())
    })?;
    let area_ratio = match (body.surface_area(), body.volume()) {
        (Ok(s), Ok(v)) => MomentReport::exact(s / v),
        _ => mom.report(|m| nf * m[2] / m[0]),
    };
    Ok(CurvatureIntegrals {
        cone_inverse_mean: mom.report(|m| m[1] / m[0]),
        surface_inverse_mean: mom.report(|m| m[3] / m[2]),
        surface_inverse_min: mom.report(|m| m[4] / m[2]),
        area_ratio,
    })
}

/// Largest variance of a unit linear functional under the cone measure and
/// under the normalized surface measure; both bound `P^∞` of that measure
/// from below.
pub fn boundary_linear_bounds(body: &ConvexBody, method: &Method) -> Result<(MomentReport, MomentReport)> {
    let region = Region::whole(body.clone());
    let n = body.dim();
    let scheme = match method {
        Method::MonteCarlo(_) => method.scheme(TheoremId::CurvatureJensen, &region, false),
        Method::Quadrature { m, .. } => RayScheme::quadrature(*m, 1),
    };
    let width = n + n * n;
    let mom = ray_moments(&region, &scheme, 1 + 2 * width, |y, _, out| {
        let gy = norm(&body.gauge_gradient_ae(y));
        out[0] = gy;
        for i in 0..n {
            out[1 + i] = y[i];
            out[1 + width + i] = gy * y[i];
            for j in 0..n {
                out[1 + n + i * n + j] = y[i] * y[j];
                out[1 + width + n + i * n + j] = gy * y[i] * y[j];
            }
        }
        Ok(())
    })?;
    let top = |m: &[f64], base: usize, scale: f64| {
        let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            m[base + n + i * n + j] / scale - m[base + i] * m[base + j] / (scale * scale)
        });
        sym_eigen(cov).0.last().copied().unwrap_or(0.0)
    };
    Ok((mom.report(|m| top(m, 1, 1.0)), mom.report(|m| top(m, 1 + width, m[0]))))
}

/// Right-hand sides of the cone and boundary Poincaré bounds and the
/// curvature quantity of the main dimension-free bound, as ratios against
/// `P^N` and `P^Lin`. Universal constants are dropped and no verdict is given;
/// the Jensen bound `A |∂Ω|/|Ω| >= n/(n-1)` is checked.
pub fn evaluate_corollaries(body: &ConvexBody, est: &SpectralEstimates, method: &Method) -> Result<CorollaryReport> {
    let n = body.dim();
    let nf = n as f64;
    let mut omissions = Vec::new();
    let mut records = Vec::new();
    let push = |records: &mut Vec<RatioRecord>, name: &str, value: MomentReport| {
        records.push(RatioRecord {
            name: name.into(),
            ratio_to_p_neumann: est.p_neumann.map(|p| value.estimate / p),
            ratio_to_p_lin: est.p_lin.map(|p| value.estimate / p),
            value,
            verdict: Verdict::RatioOnly,
        });
    };
    let iso = match body.isoperimetric_ratio() {
        Ok(i) => {
            push(&mut records, "isoperimetric_ratio", MomentReport::exact(i));
            Some(i)
        }
        Err(e) => {
            omissions.push(format!("isoperimetric_ratio: {e}"));
            None
        }
    };
    match (est.p_lin, est.p_infty_cone) {
        (Some(pl), Some(pc)) => {
            push(&mut records, "cone_poincare_rhs", MomentReport::exact(4.0 / nf * pl + 2.0 * pc))
        }
        _ => omissions.push("cone_poincare_rhs: needs p_lin and p_infty_cone".into()),
    }
    match (est.p_lin, est.p_infty_surface, iso) {
        (Some(pl), Some(ps), Some(i)) => push(
            &mut records,
            "boundary_poincare_rhs",
            MomentReport::exact(4.0 / nf * pl + 2.0 * i * ps),
        ),
        _ => omissions.push("boundary_poincare_rhs: needs p_lin, p_infty_surface and the isoperimetric ratio".into()),
    }
    let mut jensen = None;
    match curvature_integrals(body, method) {
        Ok(ci) => {
            let a = ci.cone_inverse_mean;
            let ar = ci.area_ratio.estimate;
            match est.p_infty_surface {
                Some(ps) => push(
                    &mut records,
                    "boundary_poincare_curvature_rhs",
                    MomentReport {
                        estimate: a.estimate * a.estimate + a.estimate * ar * ps,
                        stderr: a.stderr * (2.0 * a.estimate + ar * ps),
                        batches: a.batches,
                    },
                ),
                None => omissions.push("boundary_poincare_curvature_rhs: needs p_infty_surface".into()),
            }
            let vol = body.volume()?;
            let shape = ar * vol / (nf.sqrt() * vol.powf((nf - 1.0) / nf));
            let (h, k) = (ci.surface_inverse_mean, ci.surface_inverse_min);
            let q = h.estimate * k.estimate;
            push(
                &mut records,
                "main_bound_quantity",
                MomentReport {
                    estimate: shape * q,
                    stderr: shape * (h.stderr * k.estimate + k.stderr * h.estimate),
                    batches: h.batches,
                },
            );
            let lhs = nf / (nf - 1.0);
            let rhs = MomentReport { estimate: a.estimate * ar, stderr: a.stderr * ar, batches: a.batches };
            let slack = MomentReport { estimate: rhs.estimate - lhs, ..rhs };
            let tol = if method.is_deterministic() { Tolerance::Quadrature } else { Tolerance::Statistical };
            let ok = slack.estimate >= -tol.allowance(&slack, lhs, rhs.estimate);
            jensen = Some(InequalityReport {
                theorem_id: TheoremId::CurvatureJensen,
                body: body.label(),
                function: String::new(),
                lhs: MomentReport::exact(lhs),
                rhs_terms: BTreeMap::from([("inverse_curvature_times_area_ratio".to_string(), rhs)]),
                slack,
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                tolerance_rule: tol.rule().into(),
                seed: method.seed(),
                samples: method.samples(),
                diagnostics: BTreeMap::new(),
            });
        }
        Err(e) => omissions.push(format!("curvature terms: {e}")),
    }
    Ok(CorollaryReport { body: body.label(), records, jensen, omissions })
}
