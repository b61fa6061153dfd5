//! The subcommands. Each validates its config before doing any work, so
//! config problems exit with code 2 and failures during a run with 1.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::ball_body::{c_pn, check_volume_one, fradelizi_check, MeasureDescriptor, VolumeRule};
use crate::body::ConvexBody;
use crate::inequalities::suite::{run_suite, SuiteConfig};
use crate::inequalities::*;
use crate::measures::{McPlan, MomentReport, MIN_SAMPLES};
use crate::poincare::{p_lin_body, p_neumann_2d};
use crate::radial_map::{cube_transfer, fvr_pipeline, lp_a_factor, lp_b_factor, lp_scaling_row};
use crate::KlsError;

use super::config::RunConfig;
use super::output::run_sweep;
use super::CliError;

/// Boundary grid of Colesanti checks unless `quadrature` is set.
pub const COLESANTI_M: usize = 48;
/// Grid spacings `1/g` of the `report` Neumann solve in the plane.
pub const REPORT_GRID: usize = 128;

/// What a command produced: a document for `--out` or stdout, and the exit code.
pub struct Outcome {
    pub text: Option<String>,
    pub code: i32,
}

fn done(text: Option<String>) -> Outcome {
    Outcome { text, code: 0 }
}

fn check_samples(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.samples() < MIN_SAMPLES {
        return Err(CliError::config(format!("samples must be at least {MIN_SAMPLES}, got {}", cfg.samples())));
    }
    Ok(())
}

fn parse_theorems(cfg: &RunConfig) -> Result<Vec<TheoremId>, CliError> {
    let names = cfg.theorems.as_ref().ok_or_else(|| CliError::config("no theorems selected (set `theorems`)"))?;
    if names.is_empty() {
        return Err(CliError::config("empty theorem list"));
    }
    names
        .iter()
        .map(|s| {
            TheoremId::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
                let all: Vec<&str> = TheoremId::ALL.iter().map(|t| t.as_str()).collect();
                CliError::config(format!("unknown theorem `{s}` (expected one of {})", all.join(", ")))
            })
        })
        .collect()
}

fn parse_families(cfg: &RunConfig) -> Result<Vec<Family>, CliError> {
    let Some(names) = &cfg.funcs else {
        return Ok(Family::ALL.to_vec());
    };
    if names.is_empty() {
        return Err(CliError::config("empty function family list"));
    }
    let mut out = Vec::new();
    for s in names {
        if s == "all" {
            out.extend(Family::ALL);
            continue;
        }
        let f = Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| {
            let all: Vec<&str> = Family::ALL.iter().map(|f| f.as_str()).collect();
            CliError::config(format!("unknown function family `{s}` (expected all or one of {})", all.join(", ")))
        })?;
        out.push(f);
    }
    Ok(out)
}

fn curved(body: &ConvexBody) -> bool {
    body.smooth_boundary() && body.strictly_convex()
}

/// Why `theorem` cannot run on `body` with the chosen families, if it cannot.
fn applicability(theorem: TheoremId, body: &ConvexBody, families: &[Family]) -> Option<String> {
    let n = body.dim();
    let label = body.label();
    let vanishing = families.contains(&Family::BoundaryVanishingProduct);
    match theorem {
        TheoremId::MeanCurvatureHardy | TheoremId::CurvatureJensen | TheoremId::Colesanti if !curved(body) => Some(
            format!("unsupported curvature: {} needs a smooth strictly convex body, {label} is not", theorem.as_str()),
        ),
        TheoremId::Colesanti if !(2..=3).contains(&n) => Some(format!("colesanti runs in n = 2 or 3, {label} has n = {n}")),
        TheoremId::OrthantHardy if !body.is_unconditional() => {
            Some(format!("orthant_hardy needs an unconditional body, {label} is not"))
        }
        TheoremId::OriginHardy if n < 3 => Some(format!("origin_hardy needs n >= 3, {label} has n = {n}")),
        TheoremId::ClassicalHardy | TheoremId::FaberKrahn | TheoremId::OriginHardy if !vanishing => Some(format!(
            "{} needs functions vanishing on the boundary; add boundary_vanishing_product to funcs",
            theorem.as_str()
        )),
        _ => None,
    }
}

fn report_json(r: &InequalityReport) -> Value {
    let mut v = r.to_record();
    v["tolerance_rule"] = json!(r.tolerance_rule);
    v["diagnostics"] = json!(r.diagnostics);
    v
}

fn moment(m: &MomentReport) -> Value {
    json!({ "estimate": m.estimate, "stderr": m.stderr })
}

fn summary(reports: &[InequalityReport]) -> Value {
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    json!({
        "records": reports.len(),
        "pass": count(Verdict::Pass),
        "fail": count(Verdict::Fail),
        "ratio_only": count(Verdict::RatioOnly),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn internal(e: KlsError) -> CliError {
    CliError::internal(e.to_string())
}

struct VerifyJob {
    theorem: TheoremId,
    body: ConvexBody,
    funcs: Vec<TestFunction>,
}

#[derive(Default)]
struct JobOutput {
    reports: Vec<InequalityReport>,
    ratios: Vec<Value>,
    omissions: Vec<String>,
}

fn run_verify_job(job: &VerifyJob, method: &Method, colesanti_m: usize) -> Result<JobOutput, KlsError> {
    let VerifyJob { theorem, body, funcs } = job;
    let vanishing: Vec<TestFunction> =
        funcs.iter().filter(|f| f.family == Family::BoundaryVanishingProduct).cloned().collect();
    let mut out = JobOutput::default();
    out.reports = match theorem {
        TheoremId::HardyBoundary => check_hardy_boundary_many(body, funcs, method)?,
        TheoremId::FaberKrahnBoundary => check_faber_krahn_boundary_many(body, funcs, method)?,
        TheoremId::ClassicalHardy => check_classical_hardy_many(body, &vanishing, method)?,
        TheoremId::FaberKrahn => check_faber_krahn_many(body, &vanishing, method)?,
        TheoremId::OriginHardy => check_origin_hardy_many(body, &vanishing, method)?,
        TheoremId::MeanCurvatureHardy => check_mean_curvature_hardy_many(body, funcs, method)?,
        TheoremId::OrthantHardy => check_unconditional_hardy_many(body, funcs, method)?,
        TheoremId::Isoperimetry => vec![check_isoperimetry(body)?],
        TheoremId::Colesanti => check_colesanti_many(body, funcs, colesanti_m)?,
        TheoremId::CurvatureJensen => {
            let (cone, surface) = boundary_linear_bounds(body, method)?;
            let est = SpectralEstimates {
                p_neumann: None,
                p_lin: Some(p_lin_body(body)?.value),
                p_infty_cone: Some(cone.estimate),
                p_infty_surface: Some(surface.estimate),
            };
            let cor = evaluate_corollaries(body, &est, method)?;
            out.ratios = cor.records.iter().map(|r| ratio_json(&cor.body, r)).collect();
            out.omissions = cor.omissions.iter().map(|o| format!("{}: {o}", cor.body)).collect();
            cor.jensen.into_iter().collect()
        }
    };
    Ok(out)
}

fn ratio_json(body: &str, r: &RatioRecord) -> Value {
    json!({
        "body": body,
        "name": r.name,
        "value": moment(&r.value),
        "ratio_to_p_neumann": r.ratio_to_p_neumann,
        "ratio_to_p_lin": r.ratio_to_p_lin,
        "verdict": r.verdict,
    })
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.suite == Some(true) {
        return verify_suite(cfg);
    }
    cfg.allow_only(
        "verify",
        &[
            "seed", "samples", "out", "body", "bodies", "dim", "p", "theorems", "funcs", "functions_per_family",
            "quadrature", "suite", "tolerance",
        ],
    )?;
    let theorems = parse_theorems(cfg)?;
    let families = parse_families(cfg)?;
    let bodies = cfg.resolve_bodies(3)?;
    if bodies.is_empty() {
        return Err(CliError::config("no bodies selected (set `body` or `bodies`)"));
    }
    let per_family = cfg.functions_per_family.unwrap_or(FUNCTIONS_PER_FAMILY);
    if per_family == 0 {
        return Err(CliError::config("functions_per_family must be positive"));
    }
    let z = cfg.tolerance.as_ref().and_then(|t| t.z);
    if z.is_some_and(|z| !(z.is_finite() && z > 0.0)) {
        return Err(CliError::config("tolerance.z must be positive"));
    }
    let method = match cfg.quadrature {
        Some(m) => {
            if m < 2 {
                return Err(CliError::config("quadrature grid needs m >= 2"));
            }
            if let Some(b) = bodies.iter().find(|b| b.dim() > 3) {
                return Err(CliError::config(format!("quadrature runs in n <= 3, {} has n = {}", b.label(), b.dim())));
            }
            if cfg.samples.is_some() {
                return Err(CliError::config("samples and quadrature exclude each other"));
            }
            Method::quadrature(m)
        }
        None => {
            check_samples(cfg)?;
            Method::monte_carlo(cfg.samples(), cfg.seed())
        }
    };
    let colesanti_m = cfg.quadrature.unwrap_or(COLESANTI_M);
    let mut problems = Vec::new();
    let mut jobs = Vec::new();
    for body in &bodies {
        if body.dim() < 2 {
            problems.push(format!("{} has n < 2", body.label()));
            continue;
        }
        let mut funcs = Vec::new();
        for &fam in &families {
            funcs.extend(family_corpus(body, fam, per_family, cfg.seed()).map_err(CliError::config_from)?);
        }
        for &theorem in &theorems {
            if let Some(why) = applicability(theorem, body, &families) {
                problems.push(why);
                continue;
            }
            let funcs = if theorem == TheoremId::OrthantHardy {
                orthant_corpus(body, per_family, cfg.seed()).map_err(CliError::config_from)?
            } else {
                funcs.clone()
            };
            jobs.push(VerifyJob { theorem, body: body.clone(), funcs });
        }
    }
    if !problems.is_empty() {
        return Err(CliError::config(problems.join("\n")));
    }
    let outputs: Vec<Result<JobOutput, KlsError>> =
        jobs.par_iter().map(|job| run_verify_job(job, &method, colesanti_m)).collect();
    let mut reports = Vec::new();
    let mut ratios = Vec::new();
    let mut omissions = Vec::new();
    for o in outputs {
        let o = o.map_err(internal)?;
        reports.extend(o.reports);
        ratios.extend(o.ratios);
        omissions.extend(o.omissions);
    }
    if let Some(z) = z {
        reports.iter_mut().for_each(|r| r.rejudge(z));
    }
    let failed = reports.iter().any(|r| r.verdict == Verdict::Fail);
    let doc = json!({
        "command": "verify",
        "config": cfg,
        "config_sha256": cfg.hash(),
        "summary": summary(&reports),
        "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
        "ratios": ratios,
        "omissions": omissions,
    });
    Ok(Outcome { text: Some(pretty(&doc)), code: if failed { 1 } else { 0 } })
}

fn verify_suite(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("verify --suite", &["seed", "samples", "out", "dim", "suite", "quadrature"])?;
    check_samples(cfg)?;
    let n = match cfg.dim.as_deref() {
        None => 3,
        Some([n]) if *n >= 2 => *n,
        _ => return Err(CliError::config("the suite takes a single dim >= 2")),
    };
    let mut sc = SuiteConfig { n, samples: cfg.samples(), seed: cfg.seed(), ..SuiteConfig::default() };
    if let Some(m) = cfg.quadrature {
        if m < 2 {
            return Err(CliError::config("quadrature grid needs m >= 2"));
        }
        sc.oracle_m = Some(m);
    }
    let res = run_suite(&sc).map_err(internal)?;
    let exceed = res.exceedances(Z_TOL).len();
    let max_z = res.comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    let bad_identities = res.identities.iter().filter(|i| !i.check.holds).count();
    let failed = !res.failures().is_empty() || bad_identities > 0;
    let mut s = summary(&res.reports);
    s["comparisons"] = json!(res.comparisons.len());
    s["comparisons_over_3_stderr"] = json!(exceed);
    s["max_abs_z"] = json!(max_z);
    s["identities"] = json!(res.identities.len());
    s["identities_failed"] = json!(bad_identities);
    let doc = json!({
        "command": "verify",
        "config": cfg,
        "config_sha256": cfg.hash(),
        "summary": s,
        "reports": res.reports.iter().map(report_json).collect::<Vec<_>>(),
        "comparisons": res.comparisons.iter().map(|c| json!({
            "theorem_id": c.theorem_id.as_str(),
            "body": c.body,
            "function": c.function,
            "term": c.term,
            "mc": moment(&c.mc),
            "quadrature": c.quadrature,
            "z": c.z,
        })).collect::<Vec<_>>(),
        "identities": res.identities,
    });
    Ok(Outcome { text: Some(pretty(&doc)), code: if failed { 1 } else { 0 } })
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `Some` on success, `None` where the quantity does not apply.
fn optional(r: crate::Result<f64>) -> Result<Option<f64>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(KlsError::Unsupported(_) | KlsError::Precondition(_)) => Ok(None),
        Err(e) => Err(internal(e)),
    }
}

pub fn poincare2d(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("poincare2d", &["out", "body", "bodies", "dim", "grid"])?;
    if cfg.dim.as_ref().is_some_and(|d| d.iter().any(|&n| n != 2)) {
        return Err(CliError::config("poincare2d works in dim 2"));
    }
    let bodies = cfg.resolve_bodies(2)?;
    if bodies.is_empty() {
        return Err(CliError::config("no bodies selected (set `body` or `bodies`)"));
    }
    if let Some(b) = bodies.iter().find(|b| b.dim() != 2) {
        return Err(CliError::config(format!("poincare2d works in dim 2, {} is not planar", b.label())));
    }
    let grid = cfg.grid.clone().ok_or_else(|| CliError::config("poincare2d needs grid"))?;
    if grid.is_empty() || grid.iter().any(|&g| g < 4) {
        return Err(CliError::config("grid values must be >= 4"));
    }
    let rows: Vec<(ConvexBody, usize)> =
        bodies.iter().flat_map(|b| grid.iter().map(move |&g| (b.clone(), g))).collect();
    let header = ["body", "kind", "value", "error_bound", "method", "grid_h"];
    let text = run_sweep(cfg.out.as_deref(), &cfg.hash(), &header, rows.len(), |i| {
        let (body, g) = &rows[i];
        let h = 1.0 / *g as f64;
        let est = p_neumann_2d(body, h).map_err(internal)?;
        Ok(vec![body.label(), est.kind.as_str().into(), num(est.value), opt(est.error_bound), est.method, num(h)])
    })?;
    Ok(done(text))
}

pub fn ballbody(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("ballbody", &["out", "measure", "measures", "dim", "p", "body", "samples", "seed"])?;
    check_samples(cfg)?;
    let descs = cfg.resolve_measures()?;
    if descs.is_empty() {
        return Err(CliError::config("no measures selected (set `measure` or `measures`)"));
    }
    let measures = descs
        .iter()
        .map(|d| {
            let mu = d.build().map_err(CliError::config_from)?;
            if mu.dim() < 2 {
                return Err(CliError::config(format!("{} has n < 2", mu.label())));
            }
            Ok((d.clone(), mu))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let plan = McPlan::new(cfg.samples(), cfg.seed());
    let header = [
        "measure",
        "n",
        "volume_closed",
        "volume_quadrature",
        "volume_mc",
        "volume_mc_stderr",
        "fradelizi_ratio",
        "c_pn_over_n_pow",
    ];
    let text = run_sweep(cfg.out.as_deref(), &cfg.hash(), &header, measures.len(), |i| {
        let (desc, mu) = &measures[i];
        let n = mu.dim();
        let closed = optional(check_volume_one(mu, VolumeRule::ClosedForm).map(|r| r.estimate))?;
        let quad = if n <= 3 {
            optional(check_volume_one(mu, VolumeRule::Quadrature(32)).map(|r| r.estimate))?
        } else {
            None
        };
        let mc = check_volume_one(mu, VolumeRule::MonteCarlo(plan)).map_err(internal)?;
        let frad = optional(fradelizi_check(mu))?;
        let cpn = match desc {
            MeasureDescriptor::MuP { p, n } => Some(c_pn(*p, *n).map_err(internal)? / (*n as f64).powf(1.0 / p)),
            _ => None,
        };
        Ok(vec![
            mu.label(),
            n.to_string(),
            opt(closed),
            opt(quad),
            num(mc.estimate),
            num(mc.stderr),
            opt(frad),
            opt(cpn),
        ])
    })?;
    Ok(done(text))
}

pub fn lp_scaling(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("lp-scaling", &["out", "p", "dim", "samples", "seed", "cube"])?;
    check_samples(cfg)?;
    let ps = cfg.p.clone().ok_or_else(|| CliError::config("lp-scaling needs p"))?;
    let dims = cfg.dim.clone().ok_or_else(|| CliError::config("lp-scaling needs dim"))?;
    for &p in &ps {
        lp_b_factor(p).map_err(CliError::config_from)?;
        for &n in &dims {
            lp_a_factor(p, n).map_err(CliError::config_from)?;
        }
    }
    let cube = cfg.cube == Some(true);
    if cube && dims.iter().any(|&n| n < 3) {
        return Err(CliError::config("cube rows need n >= 3"));
    }
    let mut rows: Vec<(Option<f64>, usize)> =
        ps.iter().flat_map(|&p| dims.iter().map(move |&n| (Some(p), n))).collect();
    if cube {
        rows.extend(dims.iter().map(|&n| (None, n)));
    }
    let plan = McPlan::new(cfg.samples(), cfg.seed());
    let header =
        ["p", "n", "A", "B", "assembled", "mc_integral", "mc_stderr", "z", "transfer", "transfer_stderr"];
    let text = run_sweep(cfg.out.as_deref(), &cfg.hash(), &header, rows.len(), |i| match rows[i] {
        (Some(p), n) => {
            let r = lp_scaling_row(p, n, &plan).map_err(internal)?;
            let z = (r.integral_mc.estimate - r.assembled) / r.integral_mc.stderr;
            Ok(vec![
                num(p),
                n.to_string(),
                num(r.a_factor),
                num(r.b_factor),
                num(r.assembled),
                num(r.integral_mc.estimate),
                num(r.integral_mc.stderr),
                num(z),
                num(r.transfer.estimate),
                num(r.transfer.stderr),
            ])
        }
        (None, n) => {
            let t = cube_transfer(n, &plan).map_err(internal)?;
            let mut row = vec!["inf".to_string(), n.to_string()];
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.extend([num(t.estimate), num(t.stderr)]);
            Ok(row)
        }
    })?;
    Ok(done(text))
}

pub fn fvr(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("fvr", &["out", "measure", "measures", "dim", "p", "body"])?;
    let mut cfg = cfg.clone();
    if cfg.measure.is_none() && cfg.measures.is_none() {
        cfg.measure = Some(vec!["mu_p".into()]);
    }
    let measures = cfg
        .resolve_measures()?
        .iter()
        .map(|d| d.build().map_err(CliError::config_from))
        .collect::<Result<Vec<_>, _>>()?;
    if measures.is_empty() {
        return Err(CliError::config("no measures selected"));
    }
    let header = [
        "measure",
        "n",
        "in_radius",
        "second_moment",
        "second_moment_over_r2",
        "f0_pow",
        "poincare_mu",
        "bound_rhs",
        "plin_ratio",
    ];
    let text = run_sweep(cfg.out.as_deref(), &cfg.hash(), &header, measures.len(), |i| {
        let r = fvr_pipeline(&measures[i]).map_err(internal)?;
        Ok(vec![
            r.measure,
            r.n.to_string(),
            num(r.r),
            num(r.second_moment_kmu),
            num(r.volume_ratio_term),
            num(r.f0_pow),
            opt(r.poincare_mu),
            opt(r.bound_rhs),
            num(r.plin_ratio),
        ])
    })?;
    Ok(done(text))
}

/// Spectral estimates of each body and the corollary ratios built on them.
pub fn report(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.allow_only("report", &["out", "body", "bodies", "dim", "p", "samples", "seed", "grid", "quadrature"])?;
    let bodies = cfg.resolve_bodies(3)?;
    if bodies.is_empty() {
        return Err(CliError::config("no bodies selected (set `body` or `bodies`)"));
    }
    let grid = match cfg.grid.as_deref() {
        None => REPORT_GRID,
        Some([g]) if *g >= 4 => *g,
        _ => return Err(CliError::config("report takes a single grid value >= 4")),
    };
    let method = match cfg.quadrature {
        Some(m) => {
            if bodies.iter().any(|b| b.dim() > 3) || m < 2 {
                return Err(CliError::config("quadrature needs m >= 2 and n <= 3"));
            }
            Method::quadrature(m)
        }
        None => {
            check_samples(cfg)?;
            Method::monte_carlo(cfg.samples(), cfg.seed())
        }
    };
    if let Some(b) = bodies.iter().find(|b| b.dim() < 2) {
        return Err(CliError::config(format!("{} has n < 2", b.label())));
    }
    let entries: Vec<Result<Value, KlsError>> = bodies
        .par_iter()
        .map(|body| {
            let p_lin = p_lin_body(body)?;
            let neumann = if body.dim() == 2 { Some(p_neumann_2d(body, 1.0 / grid as f64)?) } else { None };
            let (cone, surface) = boundary_linear_bounds(body, &method)?;
            let est = SpectralEstimates {
                p_neumann: neumann.as_ref().map(|e| e.value),
                p_lin: Some(p_lin.value),
                p_infty_cone: Some(cone.estimate),
                p_infty_surface: Some(surface.estimate),
            };
            let cor = evaluate_corollaries(body, &est, &method)?;
            Ok(json!({
                "body": body.label(),
                "descriptor": body.descriptor(),
                "p_lin": p_lin,
                "p_neumann": neumann,
                "p_infty_cone_lower": moment(&cone),
                "p_infty_surface_lower": moment(&surface),
                "ratios": cor.records.iter().map(|r| ratio_json(&cor.body, r)).collect::<Vec<_>>(),
                "jensen": cor.jensen.as_ref().map(report_json),
                "omissions": cor.omissions,
            }))
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>, _>>().map_err(internal)?;
    let doc = json!({
        "command": "report",
        "config": cfg,
        "config_sha256": cfg.hash(),
        "bodies": entries,
    });
    Ok(done(Some(pretty(&doc))))
}
