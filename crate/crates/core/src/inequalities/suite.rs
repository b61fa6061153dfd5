//! The fixed inequality suite: every checker over a corpus of bodies and
//! test functions, with a quadrature rerun of every Monte Carlo term when
//! the dimension allows it.

use rayon::prelude::*;
use serde::Serialize;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Boundary grid for the quadrature reruns (`n <= 3`); `None` skips them.
    pub oracle_m: Option<usize>,
    /// Boundary grid of the Colesanti checks (run in `n = 2` and `3`).
    pub colesanti_m: usize,
    /// Boundary grid of the curvature identities; curvature integrands on
    /// eccentric ellipsoids need a finer grid than the checkers.
    pub identity_m: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { n: 3, samples: 200_000, seed: 20240521, oracle_m: Some(32), colesanti_m: 48, identity_m: 64 }
    }
}

/// A Monte Carlo term next to its quadrature value.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub theorem_id: TheoremId,
    pub body: String,
    pub function: String,
    pub term: String,
    pub mc: MomentReport,
    pub quadrature: f64,
    /// `(mc - quadrature) / (stderr + floor / 3)` with the roundoff floor
    /// `1e-12 max(1, |mc| + |quadrature|)`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRecord {
    pub body: String,
    pub method: String,
    pub check: IdentityCheck,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteResult {
    pub reports: Vec<InequalityReport>,
    pub comparisons: Vec<OracleComparison>,
    pub identities: Vec<IdentityRecord>,
}

impl SuiteResult {
    pub fn failures(&self) -> Vec<&InequalityReport> {
        self.reports.iter().filter(|r| !r.passed()).collect()
    }

    /// Comparisons with `|z| > z_tol`.
    pub fn exceedances(&self, z_tol: f64) -> Vec<&OracleComparison> {
        self.comparisons.iter().filter(|c| !(c.z.abs() <= z_tol)).collect()
    }
}

/// Ball, ellipsoid with semi-axes `(2, 1, 1/2, …)`, cube, `B_1.5`, `B_3` and simplex.
pub fn corpus_bodies(n: usize) -> Result<Vec<ConvexBody>> {
    let axes: Vec<f64> = (0..n).map(|i| [2.0, 1.0].get(i).copied().unwrap_or(0.5)).collect();
    Ok(vec![
        ConvexBody::ball(n, 1.0)?,
        ConvexBody::ellipsoid(&axes)?,
        ConvexBody::cube(n, 1.0)?,
        ConvexBody::lp_ball(n, 1.5, 1.0)?,
        ConvexBody::lp_ball(n, 3.0, 1.0)?,
        ConvexBody::simplex(n, 1.0)?,
    ])
}

/// Unconditional bodies whose positive-orthant parts are checked; the cross
/// polytope contributes the standard simplex `{x >= 0, Σ x <= 1}`.
pub fn orthant_bodies(n: usize) -> Result<Vec<ConvexBody>> {
    let mut out: Vec<ConvexBody> = corpus_bodies(n)?.into_iter().filter(|b| b.is_unconditional()).collect();
    out.push(ConvexBody::lp_ball(n, 1.0, 1.0)?);
    Ok(out)
}

fn vanishing(funcs: &[TestFunction]) -> Vec<TestFunction> {
    funcs.iter().filter(|f| f.family == Family::BoundaryVanishingProduct).cloned().collect()
}

/// One unit of work: a checker applied to a batch of functions on one body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Job {
    HardyBoundary,
    FaberKrahnBoundary,
    ClassicalHardy,
    FaberKrahn,
    OriginHardy,
    MeanCurvatureHardy,
    OrthantHardy,
}

fn run_job(job: Job, body: &ConvexBody, funcs: &[TestFunction], method: &Method) -> Result<Vec<InequalityReport>> {
    match job {
        Job::HardyBoundary => check_hardy_boundary_many(body, funcs, method),
        Job::FaberKrahnBoundary => check_faber_krahn_boundary_many(body, funcs, method),
        Job::ClassicalHardy => check_classical_hardy_many(body, &vanishing(funcs), method),
        Job::FaberKrahn => check_faber_krahn_many(body, &vanishing(funcs), method),
        Job::OriginHardy => check_origin_hardy_many(body, &vanishing(funcs), method),
        Job::MeanCurvatureHardy => check_mean_curvature_hardy_many(body, funcs, method),
        Job::OrthantHardy => check_unconditional_hardy_many(body, funcs, method),
    }
}

fn compare(mc: &InequalityReport, quad: &InequalityReport) -> Vec<OracleComparison> {
    let mut terms = vec![("lhs".to_string(), mc.lhs, quad.lhs.estimate)];
    for (k, v) in &mc.rhs_terms {
        terms.push((k.clone(), *v, quad.rhs_terms[k].estimate));
    }
    terms
        .into_iter()
        .map(|(term, m, q)| {
            let diff = m.estimate - q;
            let floor = ROUNDOFF * (m.estimate.abs() + q.abs()).max(1.0);
            let z = diff / (m.stderr + floor / Z_TOL);
            OracleComparison {
                theorem_id: mc.theorem_id,
                body: mc.body.clone(),
                function: mc.function.clone(),
                term,
                mc: m,
                quadrature: q,
                z,
            }
        })
        .collect()
}

/// Runs the suite. Reports come back in a fixed order regardless of the
/// thread count.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let n = cfg.n;
    let mc = Method::monte_carlo(cfg.samples, cfg.seed);
    let oracle = cfg.oracle_m.filter(|_| n <= 3).map(Method::quadrature);
    let mut jobs: Vec<(Job, ConvexBody, Vec<TestFunction>)> = Vec::new();
    for body in corpus_bodies(n)? {
        let funcs = corpus(&body, cfg.seed)?;
        let mut kinds = vec![Job::HardyBoundary, Job::FaberKrahnBoundary, Job::ClassicalHardy, Job::FaberKrahn];
        if n >= 3 {
            kinds.push(Job::OriginHardy);
        }
        if body.smooth_boundary() && body.strictly_convex() {
            kinds.push(Job::MeanCurvatureHardy);
        }
        for k in kinds {
            jobs.push((k, body.clone(), funcs.clone()));
        }
    }
    for body in orthant_bodies(n)? {
        let funcs = orthant_corpus(&body, FUNCTIONS_PER_FAMILY, cfg.seed)?;
        jobs.push((Job::OrthantHardy, body, funcs));
    }
    let outcomes: Vec<Result<(Vec<InequalityReport>, Vec<OracleComparison>)>> = jobs
        .par_iter()
        .map(|(job, body, funcs)| {
            let reports = run_job(*job, body, funcs, &mc)?;
            let mut comparisons = Vec::new();
            if let Some(q) = &oracle {
                let exact = run_job(*job, body, funcs, q)?;
                for (a, b) in reports.iter().zip(&exact) {
                    comparisons.extend(compare(a, b));
                }
            }
            Ok((reports, comparisons))
        })
        .collect();
    let mut out = SuiteResult::default();
    for o in outcomes {
        let (r, c) = o?;
        out.reports.extend(r);
        out.comparisons.extend(c);
    }
    for body in corpus_bodies(n)? {
        out.reports.push(check_isoperimetry(&body)?);
    }
    for body in [
        ConvexBody::ball(2, 1.0)?,
        ConvexBody::ellipsoid(&[2.0, 1.0])?,
        ConvexBody::ball(3, 1.0)?,
        ConvexBody::ellipsoid(&[2.0, 1.0, 0.5])?,
    ] {
        let funcs = corpus(&body, cfg.seed)?;
        out.reports.extend(check_colesanti_many(&body, &funcs, cfg.colesanti_m)?);
    }
    for body in corpus_bodies(n)?.into_iter().filter(|b| b.smooth_boundary() && b.strictly_convex()) {
        let mut methods = vec![("monte_carlo", mc)];
        if oracle.is_some() && n <= 3 {
            methods.push(("quadrature", Method::quadrature(cfg.identity_m)));
        }
        for (name, m) in methods {
            for check in mean_curvature_identities(&body, &m)? {
                out.identities.push(IdentityRecord { body: body.label(), method: name.into(), check });
            }
        }
    }
    Ok(out)
}
