//! One pass/fail line per acceptance criterion. Failing criteria are
//! reported, not asserted: the target exits 0 unless a check cannot run.

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use klslab::ball_body::{c_pn, check_volume_one, fradelizi_check, LogConcaveMeasure, VolumeRule};
use klslab::body::ConvexBody;
use klslab::inequalities::{mean_curvature_identities, Method};
use klslab::linalg::{norm, normalized};
use klslab::measures::{Custom1d, McPlan, BATCHES};
use klslab::poincare::{p_dirichlet_ball, p_neumann_2d, p_neumann_disk, szego_weinberger};
use klslab::radial_map::{cube_transfer, fvr_pipeline, lp_scaling_row, op_norm_dt};
use klslab::special::bessel_j_first_zero;

const SEED: u64 = 20240521;
const SUITE_BUDGET: Duration = Duration::from_secs(600);

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, v: Verdict) -> bool {
    println!("criterion {id} [{name}]: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v.pass
}

struct SuiteRun {
    stdout: Vec<u8>,
    code: Option<i32>,
    elapsed: Duration,
}

fn run_suite(threads: &str) -> SuiteRun {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_klslab"))
        .args(["verify", "--suite", "--samples", "2e5", "--seed", &SEED.to_string()])
        .env("KLSLAB_THREADS", threads)
        .output()
        .expect("run klslab");
    SuiteRun { stdout: out.stdout, code: out.status.code(), elapsed: start.elapsed() }
}

fn criterion_1(run: &SuiteRun, doc: &serde_json::Value) -> Verdict {
    let summary = &doc["summary"];
    let fail = summary["fail"].as_u64().unwrap_or(u64::MAX);
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in doc["reports"].as_array().into_iter().flatten() {
        let e = per.entry(r["theorem_id"].as_str().unwrap_or("?").to_string()).or_default();
        e.0 += 1;
        if r["verdict"] == "pass" {
            e.1 += 1;
        }
    }
    let counts: Vec<String> = per.iter().map(|(k, (n, p))| format!("{k} {p}/{n}")).collect();
    Verdict {
        pass: run.code == Some(0) && fail == 0 && run.elapsed < SUITE_BUDGET,
        detail: format!(
            "exit {}, {} records, {fail} failing, {:.0} s wall; {}",
            run.code.map_or("signal".into(), |c| c.to_string()),
            summary["records"],
            run.elapsed.as_secs_f64(),
            counts.join(", ")
        ),
    }
}

/// Batch-means z scores are Student t with BATCHES - 1 degrees of freedom,
/// so some exceed 3 by chance. The criterion passes when the exceedance
/// count is consistent with that rate (binomial upper tail >= 1e-3) and
/// every identity holds.
fn criterion_2(doc: &serde_json::Value) -> Verdict {
    let s = &doc["summary"];
    let total = s["comparisons"].as_u64().unwrap_or(0);
    let over = s["comparisons_over_3_stderr"].as_u64().unwrap_or(u64::MAX);
    let max_z = s["max_abs_z"].as_f64().unwrap_or(f64::NAN);
    let id_failed = s["identities_failed"].as_u64().unwrap_or(u64::MAX);
    let t = StudentsT::new(0.0, 1.0, (BATCHES - 1) as f64).unwrap();
    let rate = 2.0 * (1.0 - t.cdf(3.0));
    let tail = if over == 0 {
        1.0
    } else {
        1.0 - Binomial::new(rate, total).unwrap().cdf(over - 1)
    };
    Verdict {
        pass: total > 0 && tail >= 1e-3 && id_failed == 0,
        detail: format!(
            "{over}/{total} MC terms beyond 3 stderr of quadrature (t_{} expects {:.1}, upper tail p = {tail:.3}), max |z| {max_z:.2}, {} identities, {id_failed} failed",
            BATCHES - 1,
            rate * total as f64,
            s["identities"]
        ),
    }
}

/// Largest singular value of the tangential part of the finite-difference
/// Jacobian of `x -> x / g(x)`.
fn fd_op_norm(body: &ConvexBody, x: &[f64]) -> f64 {
    let n = x.len();
    let step = 1e-5 * norm(x);
    let g = |y: &[f64]| body.gauge(y).unwrap();
    let t = |y: &[f64]| -> Vec<f64> {
        let gy = g(y);
        y.iter().map(|v| v / gy).collect()
    };
    let mut jac = DMatrix::zeros(n, n);
    let mut grad = vec![0.0; n];
    for j in 0..n {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += step;
        b[j] -= step;
        let (ta, tb) = (t(&a), t(&b));
        for i in 0..n {
            jac[(i, j)] = (ta[i] - tb[i]) / (2.0 * step);
        }
        grad[j] = (g(&a) - g(&b)) / (2.0 * step);
    }
    let nu = DVector::from_vec(normalized(&grad));
    let proj = DMatrix::identity(n, n) - &nu * nu.transpose();
    (proj * jac).singular_values().max()
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bodies = Vec::new();
    for n in 2..=6 {
        let axes: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        bodies.push(ConvexBody::ellipsoid(&axes).unwrap());
        bodies.push(ConvexBody::lp_ball(n, 4.0, 1.0).unwrap());
    }
    let (mut worst_formula, mut worst_fd, mut points) = (0.0f64, 0.0f64, 0);
    for body in &bodies {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..body.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = op_norm_dt(body, &x).unwrap();
            let [a, b, c] = e.formula_values;
            worst_formula = worst_formula.max((a - b).abs() / a).max((a - c).abs() / a);
            worst_fd = worst_fd.max((fd_op_norm(body, &x) - e.op_norm).abs() / e.op_norm);
            points += 1;
        }
    }
    Verdict {
        pass: worst_formula <= 1e-9 && worst_fd <= 1e-5,
        detail: format!(
            "{points} points on {} bodies, max relative spread of the closed forms {worst_formula:.1e}, max relative FD error {worst_fd:.1e}",
            bodies.len()
        ),
    }
}

fn criterion_4() -> Verdict {
    let ns = [10, 20, 50, 100, 200];
    let scaled: Vec<f64> = ns.iter().map(|&n| p_dirichlet_ball(n).unwrap().scaled).collect();
    let in_band = scaled.iter().all(|&s| s > 0.80 && s <= 1.0);
    let increasing = scaled.windows(2).all(|w| w[1] > w[0]);
    let j0 = bessel_j_first_zero(0.0).unwrap();
    let zero_ok = (j0 - 2.404826).abs() <= 1e-6;
    let values: Vec<String> = ns.iter().zip(&scaled).map(|(n, s)| format!("n={n}: {s:.4}")).collect();
    Verdict {
        pass: in_band && increasing && zero_ok,
        detail: format!(
            "(n^2/4) P^D = [{}], in (0.80, 1]: {in_band}, increasing: {increasing}; j_0,1 = {j0:.7}",
            values.join(", ")
        ),
    }
}

fn criterion_5() -> Verdict {
    let truth_square = 1.0 / std::f64::consts::PI.powi(2);
    let square = p_neumann_2d(&ConvexBody::cube(2, 0.5).unwrap(), 1.0 / 512.0).unwrap().value;
    let disk = p_neumann_2d(&ConvexBody::ball(2, 1.0).unwrap(), 1.0 / 512.0).unwrap().value;
    let truth_disk = p_neumann_disk(1.0).unwrap();
    let bodies = [
        ConvexBody::cube(2, 0.5).unwrap(),
        ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap(),
        ConvexBody::simplex(2, 1.0).unwrap(),
        ConvexBody::lp_ball(2, 1.5, 1.0).unwrap(),
        ConvexBody::lp_ball(2, 4.0, 1.0).unwrap(),
    ];
    let mut sw = Vec::new();
    let mut sw_ok = true;
    for b in &bodies {
        let b = b.volume_normalized().unwrap();
        let r = szego_weinberger(&b, 1.0 / 128.0).unwrap();
        sw_ok &= r.holds;
        sw.push(format!("{} {:.5} >= {:.5}", r.body, r.p_body.value, r.p_disk));
    }
    let sq_ok = (square - truth_square).abs() <= 1e-3;
    let disk_ok = (disk - truth_disk).abs() <= 2e-3;
    Verdict {
        pass: sq_ok && disk_ok && sw_ok,
        detail: format!(
            "square {square:.6} vs {truth_square:.6}, disk {disk:.6} vs {truth_disk:.6}; area-one bodies vs disk: {}",
            sw.join("; ")
        ),
    }
}

fn criterion_6() -> Verdict {
    let mut worst_closed = 0.0f64;
    for n in [2, 3, 4, 8, 16, 64] {
        let mut measures = vec![LogConcaveMeasure::Gaussian { n }];
        for p in [1.0, 1.5, 2.0, 4.0] {
            measures.push(LogConcaveMeasure::MuP { p, n });
        }
        for mu in &measures {
            let v = check_volume_one(mu, VolumeRule::ClosedForm).unwrap().estimate;
            worst_closed = worst_closed.max((v - 1.0).abs());
        }
    }
    let gauss = check_volume_one(
        &LogConcaveMeasure::Gaussian { n: 3 },
        VolumeRule::MonteCarlo(McPlan::new(200_000, SEED)),
    )
    .unwrap();
    let gauss_ok = (gauss.estimate - 1.0).abs() <= 0.01;

    let mut band_fail = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in [1.0, 1.5, 2.0, 4.0] {
        for n in 4..=128 {
            let r = c_pn(p, n).unwrap() / (n as f64).powf(1.0 / p);
            lo = lo.min(r);
            hi = hi.max(r);
            if !(0.2..=2.0).contains(&r) {
                band_fail.push((p, n, r));
            }
        }
    }
    let band_detail = match (band_fail.first(), band_fail.last()) {
        (Some(a), Some(b)) => format!(
            "{} (p, n) outside [0.2, 2], from p={} n={} ({:.3}) to p={} n={} ({:.3})",
            band_fail.len(),
            a.0,
            a.1,
            a.2,
            b.0,
            b.1,
            b.2
        ),
        _ => "all inside [0.2, 2]".into(),
    };

    let laplace = Custom1d::new(-40.0, 40.0, Arc::new(|t: f64| -t.abs())).unwrap();
    let corpus = vec![
        LogConcaveMeasure::MuP { p: 1.0, n: 3 },
        LogConcaveMeasure::MuP { p: 1.5, n: 4 },
        LogConcaveMeasure::MuP { p: 4.0, n: 3 },
        LogConcaveMeasure::Gaussian { n: 5 },
        LogConcaveMeasure::UniformBody(ConvexBody::ball(3, 1.0).unwrap()),
        LogConcaveMeasure::UniformBody(ConvexBody::cube(4, 0.5).unwrap()),
        LogConcaveMeasure::Custom1dProduct { law: laplace, n: 2 },
    ];
    let worst_ratio = corpus.iter().map(|mu| fradelizi_check(mu).unwrap()).fold(0.0f64, f64::max);
    let shifted = Custom1d::new(-1.0, 45.0, Arc::new(|t: f64| -(t + 1.0))).unwrap();
    let eq = fradelizi_check(&LogConcaveMeasure::Custom1dProduct { law: shifted, n: 3 }).unwrap();
    let frad_ok = worst_ratio <= 1.0 && (eq - 1.0).abs() <= 1e-9;

    Verdict {
        pass: worst_closed <= 1e-10 && gauss_ok && band_fail.is_empty() && frad_ok,
        detail: format!(
            "closed-form |K_mu| max error {worst_closed:.1e}; MC Gaussian n=3 {:.4} +- {:.4}; c_pn/n^(1/p) in [{lo:.3}, {hi:.3}], {band_detail}; Fradelizi max {worst_ratio:.4} on {} measures, shifted exponential {eq:.12}",
            gauss.estimate,
            gauss.stderr,
            corpus.len()
        ),
    }
}

fn criterion_7() -> Verdict {
    let ns = [8usize, 16, 32, 64, 128];
    let mut worst_z = 0.0f64;
    let mut plateau_ok = true;
    let mut plateau = Vec::new();
    for p in [2.0, 4.0, 8.0] {
        let rows: Vec<_> = ns
            .iter()
            .map(|&n| lp_scaling_row(p, n, &McPlan::new(200_000, SEED)).unwrap())
            .collect();
        for r in &rows {
            worst_z = worst_z.max((r.integral_mc.estimate - r.assembled).abs() / r.integral_mc.stderr);
        }
        let mut worst_ratio = 0.0f64;
        for w in rows.windows(2) {
            if w[0].n as f64 >= 4.0 * p {
                worst_ratio = worst_ratio.max(w[1].transfer.estimate / w[0].transfer.estimate);
            }
        }
        plateau_ok &= worst_ratio < 1.25;
        plateau.push(format!("p={p}: {worst_ratio:.3}"));
    }
    let cube: Vec<f64> = ns
        .iter()
        .map(|&n| cube_transfer(n, &McPlan::new(200_000, SEED)).unwrap().estimate)
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = cube.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let z_ok = worst_z <= 3.0;
    let slope_ok = (slope - 1.0).abs() <= 0.1;
    Verdict {
        pass: z_ok && plateau_ok && slope_ok,
        detail: format!(
            "MC vs n^2 A B max |z| {worst_z:.2}; largest doubling ratio for n >= 4p: {}; cube log-log slope {slope:.3}",
            plateau.join(", ")
        ),
    }
}

/// "Flat in n" is read as: the last doubling (32 to 64) changes the
/// value by less than 10% for every p.
fn criterion_8() -> Verdict {
    let mut max = (0.0f64, 0.0, 0);
    let mut flat = true;
    let mut trend = Vec::new();
    for p in [1.0, 1.25, 1.5, 2.0] {
        let vals: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                let v = fvr_pipeline(&LogConcaveMeasure::MuP { p, n }).unwrap().volume_ratio_term;
                if v > max.0 {
                    max = (v, p, n);
                }
                v
            })
            .collect();
        let last = vals[3] / vals[2];
        flat &= vals.iter().all(|v| v.is_finite()) && last < 1.1;
        trend.push(format!("p={p}: {:.3} to {:.3}", vals[0], vals[3]));
    }
    Verdict {
        pass: flat,
        detail: format!(
            "max int |x|^2 / R^2 = {:.4} at p={} n={}; n=8 to 64: {}",
            max.0,
            max.1,
            max.2,
            trend.join(", ")
        ),
    }
}

fn criterion_9() -> Verdict {
    let mut worst_quad = 0.0f64;
    let bodies = [
        ConvexBody::ball(2, 1.0).unwrap(),
        ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap(),
        ConvexBody::ball(3, 1.0).unwrap(),
        ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap(),
    ];
    for b in &bodies {
        for c in mean_curvature_identities(b, &Method::quadrature(64)).unwrap() {
            worst_quad = worst_quad.max(c.difference.estimate.abs());
        }
    }
    let mut mc_failed = Vec::new();
    let mut worst_z = 0.0f64;
    for n in [4, 8, 16, 32, 64] {
        let ball = ConvexBody::ball(n, 1.0).unwrap();
        for c in mean_curvature_identities(&ball, &Method::monte_carlo(200_000, SEED)).unwrap() {
            if c.difference.stderr > 0.0 {
                worst_z = worst_z.max(c.difference.estimate.abs() / c.difference.stderr);
            }
            if !c.holds {
                mc_failed.push(format!("n={n} {}", c.name));
            }
        }
    }
    Verdict {
        pass: worst_quad <= 1e-6 && mc_failed.is_empty(),
        detail: format!(
            "quadrature max |difference| {worst_quad:.1e} on 4 bodies; MC on the ball n=4..64 max |z| {worst_z:.2}, failures: {}",
            if mc_failed.is_empty() { "none".into() } else { mc_failed.join(", ") }
        ),
    }
}

fn criterion_10(a: &SuiteRun, b: &SuiteRun) -> Verdict {
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    Verdict {
        pass: same && a.code == b.code,
        detail: format!(
            "suite with KLSLAB_THREADS=1 and =3: {} bytes vs {} bytes, {}",
            a.stdout.len(),
            b.stdout.len(),
            if same { "identical" } else { "different" }
        ),
    }
}

fn main() {
    let start = Instant::now();
    let first = run_suite("1");
    let doc: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap_or(serde_json::Value::Null);
    let mut passed = 0;
    passed += report(1, "inequality suite", criterion_1(&first, &doc)) as usize;
    passed += report(2, "quadrature oracles", criterion_2(&doc)) as usize;
    passed += report(3, "radial map derivative", criterion_3()) as usize;
    passed += report(4, "Dirichlet ball asymptotics", criterion_4()) as usize;
    passed += report(5, "Neumann eigensolver", criterion_5()) as usize;
    passed += report(6, "K. Ball bodies", criterion_6()) as usize;
    passed += report(7, "l_p transfer scaling", criterion_7()) as usize;
    passed += report(8, "finite volume ratio", criterion_8()) as usize;
    passed += report(9, "curvature identities", criterion_9()) as usize;
    let second = run_suite("3");
    passed += report(10, "determinism", criterion_10(&first, &second)) as usize;
    println!("acceptance: {passed}/10 criteria pass in {:.0} s", start.elapsed().as_secs_f64());
}
