//! Estimators for Poincaré-type constants: the linear constant, the Neumann
//! constant (planar eigensolver and 1-D Sturm–Liouville), the Dirichlet
//! constant of balls, candidate-search lower bounds for the weak L²-L∞
//! constants and the harmonic-class constant in the plane.

pub mod neumann2d;
pub mod sturm;


use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::body::ConvexBody;
use crate::error::{KlsError, Result};
use crate::linalg::{mean_and_covariance, sym_eigen};
use crate::measures::mc::batch_stderr;
use crate::measures::{Custom1d, MeasureSampler, Region, RayScheme, BATCHES};
use crate::special::{bessel_j_first_zero, bessel_j_prime_first_zero, bessel_zero_asymptote, bisect, gamma_ur};

pub use neumann2d::Raster;
pub use sturm::Mode1d;

/// Cells of the fine 1-D grid; the coarse Richardson partner has half.
pub const STURM_CELLS: usize = 8192;
/// Two-sided tail mass left outside the truncation interval of `mu_p`.
const MU_P_TAIL: f64 = 1e-12;
/// Boundary nodes per coordinate for harmonic-basis moments.
const HARMONIC_GRID: usize = 64;
/// Reciprocal condition number below which the gradient Gram matrix is
/// treated as singular.
const GRAM_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    PLin,
    PNeumann,
    PDirichlet,
    PInftyLower,
    P1InftyLower,
    PHarmonicLower,
}

impl SpectralKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralKind::PLin => "P_lin",
            SpectralKind::PNeumann => "P_neumann",
            SpectralKind::PDirichlet => "P_dirichlet",
            SpectralKind::PInftyLower => "P_infty_lower",
            SpectralKind::P1InftyLower => "P_1infty_lower",
            SpectralKind::PHarmonicLower => "P_harmonic_lower",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub kind: SpectralKind,
    pub value: f64,
    pub method: String,
    pub error_bound: Option<f64>,
    /// Warnings and side results.
    pub notes: Vec<String>,
}

impl SpectralEstimate {
    fn new(kind: SpectralKind, value: f64, method: impl Into<String>, error_bound: Option<f64>) -> Self {
        SpectralEstimate { kind, value, method: method.into(), error_bound, notes: Vec::new() }
    }

    pub fn error_or_zero(&self) -> f64 {
        self.error_bound.unwrap_or(0.0)
    }
}

/// `P^Lin` of a built-in body: top eigenvalue of the exact covariance.
pub fn p_lin_body(body: &ConvexBody) -> Result<SpectralEstimate> {
    let (vals, _) = sym_eigen(body.covariance()?);
    let top = vals.last().copied().unwrap_or(0.0);
    Ok(SpectralEstimate::new(SpectralKind::PLin, top, "exact covariance", Some(0.0)))
}

/// `P^Lin` from a point cloud: top eigenvalue of the sample covariance.
pub fn p_lin_cloud(points: &[Vec<f64>]) -> Result<SpectralEstimate> {
    let (_, cov) = mean_and_covariance(points)?;
    let (vals, _) = sym_eigen(cov);
    let top = vals.last().copied().unwrap_or(0.0);
    // Plug-in error of a variance: sqrt(2/N) relative for near-Gaussian marginals.
    let err = top * (2.0 / points.len() as f64).sqrt();
    Ok(SpectralEstimate::new(SpectralKind::PLin, top, "sample covariance", Some(err)))
}

/// `P^Lin` of a sampler's measure from `samples` draws.
pub fn p_lin(sampler: &MeasureSampler, samples: usize) -> Result<SpectralEstimate> {
    let points: Vec<Vec<f64>> = sampler.sample(samples)?.into_iter().map(|s| s.point).collect();
    p_lin_cloud(&points)
}

/// `P^N` of a planar body from the rasterized zero-flux Laplacian at
/// spacings `h` and `2h`. The value is the fine one. The staircase boundary
/// makes convergence first order on curved bodies, so the error bound is the
/// first-order Richardson estimate `|P_h - P_{2h}|`.
pub fn p_neumann_2d(body: &ConvexBody, h: f64) -> Result<SpectralEstimate> {
    let fine = Raster::new(body, h)?;
    let coarse = Raster::new(body, 2.0 * h)?;
    let (lf, _) = fine.first_eigenpair(1e-10)?;
    let (lc, _) = coarse.first_eigenpair(1e-10)?;
    let (pf, pc) = (1.0 / lf, 1.0 / lc);
    let mut est = SpectralEstimate::new(
        SpectralKind::PNeumann,
        pf,
        format!("5-point zero-flux Laplacian, multigrid inverse iteration, h = {h}"),
        Some((pf - pc).abs()),
    );
    est.notes.push(format!("cells = {}, coarse value = {pc}", fine.cells()));
    Ok(est)
}

/// `P^N` of the disk of radius `r`: `r² / j'_{1,1}²`.
pub fn p_neumann_disk(radius: f64) -> Result<f64> {
    let j = bessel_j_prime_first_zero(1.0)?;
    Ok(radius * radius / (j * j))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletBall {
    pub estimate: SpectralEstimate,
    pub order: f64,
    pub zero: f64,
    /// `β + c₀ β^{1/3}` with `β` the Bessel order.
    pub asymptote: f64,
    /// `(n²/4) P^D`.
    pub scaled: f64,
}

/// `P^D` of the unit ball in `R^n`: `1 / j²_{(n-2)/2, 1}`.
pub fn p_dirichlet_ball(n: usize) -> Result<DirichletBall> {
    if n < 2 {
        return Err(KlsError::InvalidParameter(format!("Dirichlet ball needs n >= 2, got {n}")));
    }
    let order = (n as f64 - 2.0) / 2.0;
    let zero = bessel_j_first_zero(order)?;
    let value = 1.0 / (zero * zero);
    let nf = n as f64;
    Ok(DirichletBall {
        estimate: SpectralEstimate::new(SpectralKind::PDirichlet, value, "first Bessel zero, bisection", Some(0.0)),
        order,
        zero,
        asymptote: bessel_zero_asymptote(order),
        scaled: nf * nf / 4.0 * value,
    })
}

/// `P^N` of a 1-D log-concave measure given by its (unnormalized)
/// log-density on a truncation interval. Richardson over `cells` and
/// `cells / 2` gives the error bound.
pub fn p_1d_logconcave(log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Result<SpectralEstimate> {
    let mass = sturm::check_truncation(log_density, lo, hi)?;
    let fine = sturm::second_mode(log_density, lo, hi, cells)?;
    let coarse = sturm::second_mode(log_density, lo, hi, cells / 2)?;
    let (pf, pc) = (1.0 / fine.lambda, 1.0 / coarse.lambda);
    let mut est = SpectralEstimate::new(
        SpectralKind::PNeumann,
        pf,
        format!("Sturm-Liouville finite volumes, {cells} cells on [{lo}, {hi}]"),
        Some((pf - pc).abs() / 3.0),
    );
    est.notes.push(format!("interval mass >= {mass:.12}"));
    Ok(est)
}

/// Half-width `s` of the symmetric interval with `mu_p` mass `1 - MU_P_TAIL`.
fn mu_p_half_width(p: f64) -> Result<f64> {
    let a = 1.0 / p;
    let x = bisect(|x| gamma_ur(a, x) - MU_P_TAIL, 1e-3, 400.0, 1e-12)?;
    Ok(x.powf(a))
}

fn mu_p_log_density(p: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| -t.abs().powf(p)
}

/// `P^N` of `mu_p`, which by tensorization is also that of `mu_p^n`.
pub fn p_1d_mu_p(p: f64) -> Result<SpectralEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(KlsError::InvalidParameter(format!("mu_p needs p in [1, inf), got {p}")));
    }
    if p == 1.0 {
        // The gap 1/4 of the two-sided exponential sits at the bottom of the
        // essential spectrum; truncations approach it only like 1/L².
        return Ok(SpectralEstimate::new(SpectralKind::PNeumann, 4.0, "closed form, two-sided exponential", Some(0.0)));
    }
    let s = mu_p_half_width(p)?;
    p_1d_logconcave(&mu_p_log_density(p), -s, s, STURM_CELLS)
}

/// Second Neumann mode of `mu_p` for Rayleigh-quotient checks.
pub fn mode_1d_mu_p(p: f64) -> Result<Mode1d> {
    let s = mu_p_half_width(p)?;
    sturm::second_mode(&mu_p_log_density(p), -s, s, STURM_CELLS)
}

pub fn p_1d_custom(law: &Custom1d) -> Result<SpectralEstimate> {
    p_1d_logconcave(&|t| law.log_density(t), law.lo, law.hi, STURM_CELLS)
}

pub fn mode_1d_custom(law: &Custom1d) -> Result<Mode1d> {
    sturm::second_mode(&|t| law.log_density(t), law.lo, law.hi, STURM_CELLS)
}

/// A test function with an optional Lipschitz certificate.
#[derive(Clone)]
pub struct Candidate {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub lipschitz_bound: Option<f64>,
}

impl std::fmt::Debug for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Candidate").field("name", &self.name).field("lipschitz_bound", &self.lipschitz_bound).finish()
    }
}

impl Candidate {
    pub fn new(name: impl Into<String>, lipschitz_bound: Option<f64>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Candidate { name: name.into(), f: Arc::new(f), lipschitz_bound }
    }
}

/// Weighted median of `(value, weight)` pairs.
fn weighted_median(vals: &mut [(f64, f64)]) -> f64 {
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = vals.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(v, w) in vals.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    vals.last().map_or(0.0, |v| v.0)
}

/// `(Var f, (∫|f - med f|)²)` of weighted values.
fn spread(vals: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = vals.iter().map(|v| v.1).sum();
    let mean = vals.iter().map(|(v, w)| v * w).sum::<f64>() / total;
    let var = vals.iter().map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    let mut sorted = vals.to_vec();
    let med = weighted_median(&mut sorted);
    let mad = vals.iter().map(|(v, w)| w * (v - med).abs()).sum::<f64>() / total;
    (var, mad * mad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InftyLowerBounds {
    pub p_infty: SpectralEstimate,
    pub p_1infty: SpectralEstimate,
}

/// Lower bounds for `P^∞` and `P^{1,∞}`: the largest `Var f / L²` and
/// `(∫|f - med f|)² / L²` over candidates with Lipschitz certificate `L`,
/// estimated from `samples` draws of the sampler's measure. Error bounds are
/// batch-means standard errors of the winning candidate.
pub fn p_infty_lower(sampler: &MeasureSampler, candidates: &[Candidate], samples: usize) -> Result<InftyLowerBounds> {
    let draws = sampler.sample(samples)?;
    let mut notes = Vec::new();
    let mut best_var = (0.0, 0.0, String::from("none"));
    let mut best_mad = (0.0, 0.0, String::from("none"));
    let batch = (draws.len() / BATCHES).max(1);
    for c in candidates {
        let l = match c.lipschitz_bound {
            Some(l) if l.is_finite() && l >= 0.0 => l,
            _ => {
                notes.push(format!("skipped {}: no Lipschitz certificate", c.name));
                continue;
            }
        };
        if l == 0.0 {
            continue;
        }
        let vals: Vec<(f64, f64)> = draws.iter().map(|s| ((c.f)(&s.point), s.weight)).collect();
        let (var, mad2) = spread(&vals);
        let (var, mad2) = (var / (l * l), mad2 / (l * l));
        let per_batch: Vec<(f64, f64)> = vals.chunks(batch).map(spread).collect();
        if var > best_var.0 {
            let se = batch_stderr(&per_batch.iter().map(|b| b.0 / (l * l)).collect::<Vec<_>>());
            best_var = (var, se, c.name.clone());
        }
        if mad2 > best_mad.0 {
            let se = batch_stderr(&per_batch.iter().map(|b| b.1 / (l * l)).collect::<Vec<_>>());
            best_mad = (mad2, se, c.name.clone());
        }
    }
    let mut p_infty = SpectralEstimate::new(
        SpectralKind::PInftyLower,
        best_var.0,
        format!("candidate search, best = {}", best_var.2),
        Some(best_var.1),
    );
    p_infty.notes = notes.clone();
    let mut p_1infty = SpectralEstimate::new(
        SpectralKind::P1InftyLower,
        best_mad.0,
        format!("candidate search, best = {}", best_mad.2),
        Some(best_mad.1),
    );
    p_1infty.notes = notes;
    Ok(InftyLowerBounds { p_infty, p_1infty })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicReport {
    pub estimate: SpectralEstimate,
    pub degree_used: usize,
    pub neumann: Option<SpectralEstimate>,
    /// `P^N / P^H`, reported without a verdict.
    pub ratio: Option<f64>,
}

/// Values and gradients of `Re z^k, Im z^k`, `k = 1..=d`, at `(x, y)`.
fn harmonic_basis(x: f64, y: f64, d: usize, vals: &mut [f64], grads: &mut [[f64; 2]]) {
    // z^{k-1} and z^k.
    let (mut pr, mut pi) = (1.0, 0.0);
    for k in 1..=d {
        let kf = k as f64;
        vals[2 * k - 2] = pr * x - pi * y;
        vals[2 * k - 1] = pr * y + pi * x;
        grads[2 * k - 2] = [kf * pr, -kf * pi];
        grads[2 * k - 1] = [kf * pi, kf * pr];
        let (nr, ni) = (pr * x - pi * y, pr * y + pi * x);
        pr = nr;
        pi = ni;
    }
}

/// `sup Var h / ∫|∇h|²` over harmonic polynomials of degree at most `d`.
fn harmonic_constant(region: &Region, d: usize) -> Result<Option<f64>> {
    let m = 2 * d;
    let pairs = m * (m + 1) / 2;
    let k = m + 2 * pairs;
    let scheme = RayScheme::quadrature(HARMONIC_GRID, d + 2);
    let mom = crate::measures::ray_moments(region, &scheme, k, |y, nodes, out| {
        let mut vals = vec![0.0; m];
        let mut grads = vec![[0.0; 2]; m];
        for &(r, w) in nodes {
            harmonic_basis(r * y[0], r * y[1], d, &mut vals, &mut grads);
            for i in 0..m {
                out[i] += w * vals[i];
            }
            let mut idx = m;
            for i in 0..m {
                for j in 0..=i {
                    out[idx] += w * vals[i] * vals[j];
                    out[idx + pairs] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    idx += 1;
                }
            }
        }
        Ok(())
    })?;
    let mv = mom.means();
    let mut cov = nalgebra::DMatrix::zeros(m, m);
    let mut gram = nalgebra::DMatrix::zeros(m, m);
    let mut idx = m;
    for i in 0..m {
        for j in 0..=i {
            let c = mv[idx] - mv[i] * mv[j];
            let g = mv[idx + pairs];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
            idx += 1;
        }
    }
    let (gvals, _) = sym_eigen(gram.clone());
    let (gmin, gmax) = (gvals[0], gvals[m - 1]);
    if !(gmin > GRAM_RCOND * gmax) {
        return Ok(None);
    }
    let chol = match gram.cholesky() {
        Some(c) => c,
        None => return Ok(None),
    };
    let linv = chol.l().try_inverse().ok_or_else(|| KlsError::InternalConsistency("Cholesky factor not invertible".into()))?;
    let reduced = &linv * cov * linv.transpose();
    let (vals, _) = sym_eigen(0.5 * (&reduced + reduced.transpose()));
    Ok(Some(vals[m - 1]))
}

/// `P^H` lower bound in the plane over harmonic polynomials of degree at
/// most `degree_max`, and the ratio against `p_neumann_2d` at `grid_h` when
/// a grid is given.
pub fn p_harmonic_2d(body: &ConvexBody, degree_max: usize, grid_h: Option<f64>) -> Result<HarmonicReport> {
    if body.dim() != 2 {
        return Err(KlsError::InvalidInput("harmonic constant is computed in the plane only".into()));
    }
    if degree_max == 0 {
        return Err(KlsError::InvalidParameter("harmonic degree must be at least 1".into()));
    }
    let region = Region::whole(body.clone());
    let mut notes = Vec::new();
    let mut degree = degree_max;
    let value = loop {
        match harmonic_constant(&region, degree)? {
            Some(v) => break v,
            None if degree > 1 => {
                notes.push(format!("gradient Gram matrix singular at degree {degree}; reducing"));
                degree -= 1;
            }
            None => return Err(KlsError::InternalConsistency("gradient Gram matrix singular at degree 1".into())),
        }
    };
    let mut estimate = SpectralEstimate::new(
        SpectralKind::PHarmonicLower,
        value,
        format!("harmonic polynomials up to degree {degree}, polar quadrature"),
        Some(0.0),
    );
    estimate.notes = notes;
    let neumann = grid_h.map(|h| p_neumann_2d(body, h)).transpose()?;
    let ratio = neumann.as_ref().map(|pn| pn.value / value);
    Ok(HarmonicReport { estimate, degree_used: degree, neumann, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SzegoWeinberger {
    pub body: String,
    pub p_body: SpectralEstimate,
    pub area: f64,
    pub disk_radius: f64,
    pub p_disk: f64,
    pub holds: bool,
}

/// Compares `P^N` of a planar body with that of the disk of equal area,
/// which is known in closed form; the body may exceed the disk only by
/// three error bounds.
pub fn szego_weinberger(body: &ConvexBody, h: f64) -> Result<SzegoWeinberger> {
    let p_body = p_neumann_2d(body, h)?;
    let area = body.volume()?;
    let disk_radius = (area / PI).sqrt();
    let p_disk = p_neumann_disk(disk_radius)?;
    let holds = p_body.value + 3.0 * p_body.error_or_zero() >= p_disk;
    Ok(SzegoWeinberger { body: body.label(), p_body, area, disk_radius, p_disk, holds })
}
