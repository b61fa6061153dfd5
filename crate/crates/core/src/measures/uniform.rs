//! Uniform, cone and surface samplers on convex bodies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mc::{chunk_rng, McPlan, CHUNK};
use crate::body::{BodyKind, ConvexBody, FacePatch};
use crate::error::{KlsError, Result};
use crate::linalg::norm;

/// Rejection sampling is refused below this bounding-box acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
/// Rejection sampling is only offered up to this dimension.
pub const MAX_REJECTION_DIM: usize = 10;

/// A body, optionally intersected with the positive orthant `Q = [0, inf)^n`.
#[derive(Debug, Clone)]
pub struct Region {
    pub body: ConvexBody,
    pub orthant: bool,
}

impl Region {
    pub fn whole(body: ConvexBody) -> Self {
        Region { body, orthant: false }
    }

    /// `K ∩ Q` for an unconditional `K`.
    pub fn orthant(body: ConvexBody) -> Result<Self> {
        if !body.is_unconditional() {
            return Err(KlsError::Precondition(format!(
                "{} is not unconditional; its orthant part cannot be sampled by folding",
                body.label()
            )));
        }
        Ok(Region { body, orthant: true })
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn label(&self) -> String {
        if self.orthant {
            format!("{}∩Q", self.body.label())
        } else {
            self.body.label()
        }
    }

    pub fn ln_volume(&self) -> Result<f64> {
        let v = self.body.ln_volume()?;
        Ok(if self.orthant { v - self.dim() as f64 * std::f64::consts::LN_2 } else { v })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (!self.orthant || x.iter().all(|v| *v >= 0.0)) && self.body.gauge_unchecked(x) <= 1.0
    }

    fn fold(&self, x: &mut [f64]) {
        if self.orthant {
            for v in x {
                *v = v.abs();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformMethod {
    /// Exact transformation of elementary variates (built-in kinds only).
    Pushforward,
    Rejection,
    HitAndRun,
}

#[derive(Debug, Clone)]
pub struct UniformSampler {
    region: Region,
    method: UniformMethod,
    pub burn_in: usize,
    pub thinning: usize,
}

fn gaussian_direction(rng: &mut ChaCha8Rng, n: usize, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let r = norm(out);
        if r > 0.0 {
            for v in out.iter_mut() {
                *v /= r;
            }
            return;
        }
        debug_assert!(n > 0);
    }
}

impl UniformSampler {
    /// Exact pushforward for built-in kinds, rejection for generic bodies in
    /// low dimension and hit-and-run otherwise.
    pub fn auto(region: Region) -> Result<Self> {
        let method = match region.body.kind() {
            BodyKind::GenericSmooth(_) if region.dim() <= MAX_REJECTION_DIM => UniformMethod::Rejection,
            BodyKind::GenericSmooth(_) => UniformMethod::HitAndRun,
            _ => UniformMethod::Pushforward,
        };
        Self::new(region, method)
    }

    pub fn new(region: Region, method: UniformMethod) -> Result<Self> {
        let n = region.dim();
        match method {
            UniformMethod::Pushforward => {
                if matches!(region.body.kind(), BodyKind::GenericSmooth(_)) {
                    return Err(KlsError::Unsupported("no exact pushforward for a gauge-only body".into()));
                }
            }
            UniformMethod::Rejection => {
                let acceptance = rejection_acceptance(&region)?;
                if n > MAX_REJECTION_DIM || acceptance < MIN_ACCEPTANCE {
                    return Err(KlsError::MethodSwitch { acceptance });
                }
            }
            UniformMethod::HitAndRun => {}
        }
        Ok(UniformSampler { region, method, burn_in: 10 * n * n, thinning: n })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn method(&self) -> UniformMethod {
        self.method
    }

    /// Draws `count` points of one chunk, handing each to `emit`.
    pub fn for_each_point(&self, rng: &mut ChaCha8Rng, count: usize, mut emit: impl FnMut(&[f64])) {
        let n = self.region.dim();
        let mut x = vec![0.0; n];
        match self.method {
            UniformMethod::Pushforward => {
                for _ in 0..count {
                    pushforward_point(&self.region.body, rng, &mut x);
                    self.region.fold(&mut x);
                    emit(&x);
                }
            }
            UniformMethod::Rejection => {
                let bbox = self.region.body.bounding_box();
                for _ in 0..count {
                    loop {
                        for (v, (lo, hi)) in x.iter_mut().zip(&bbox) {
                            let lo = if self.region.orthant { lo.max(0.0) } else { *lo };
                            *v = lo + (hi - lo) * rng.random::<f64>();
                        }
                        if self.region.contains(&x) {
                            break;
                        }
                    }
                    emit(&x);
                }
            }
            UniformMethod::HitAndRun => {
                // Chain on the full body started at the origin; folding maps
                // λ_K onto λ_{K ∩ Q} for unconditional K.
                let mut d = vec![0.0; n];
                let mut step = |x: &mut [f64], rng: &mut ChaCha8Rng| {
                    gaussian_direction(rng, n, &mut d);
                    let (lo, hi) = self.region.body.chord(x, &d);
                    let t = lo + (hi - lo) * rng.random::<f64>();
                    for (v, dv) in x.iter_mut().zip(&d) {
                        *v += t * dv;
                    }
                };
                for _ in 0..self.burn_in {
                    step(&mut x, rng);
                }
                let mut out = vec![0.0; n];
                for _ in 0..count {
                    for _ in 0..self.thinning.max(1) {
                        step(&mut x, rng);
                    }
                    out.copy_from_slice(&x);
                    self.region.fold(&mut out);
                    emit(&out);
                }
            }
        }
    }

    /// All `plan.samples` points, chunk by chunk.
    pub fn sample(&self, plan: &McPlan) -> Vec<Vec<f64>> {
        let mut all = Vec::with_capacity(plan.samples);
        for c in 0..plan.chunks() {
            let count = CHUNK.min(plan.samples - c * CHUNK);
            let mut rng = chunk_rng(plan.seed, plan.stream, c as u64);
            self.for_each_point(&mut rng, count, |x| all.push(x.to_vec()));
        }
        all
    }
}

fn rejection_acceptance(region: &Region) -> Result<f64> {
    let bbox = region.body.bounding_box();
    let ln_box: f64 = bbox
        .iter()
        .map(|(lo, hi)| {
            let lo = if region.orthant { lo.max(0.0) } else { *lo };
            (hi - lo).ln()
        })
        .sum();
    match region.ln_volume() {
        Ok(v) => Ok((v - ln_box).exp()),
        Err(KlsError::Unsupported(_)) => {
            // Pilot run for gauge-only bodies without a volume formula.
            let mut rng = chunk_rng(0x5eed, 0, 0);
            let trials = 200_000;
            let mut hits = 0usize;
            let mut x = vec![0.0; region.dim()];
            for _ in 0..trials {
                for (v, (lo, hi)) in x.iter_mut().zip(&bbox) {
                    let lo = if region.orthant { lo.max(0.0) } else { *lo };
                    *v = lo + (hi - lo) * rng.random::<f64>();
                }
                if region.contains(&x) {
                    hits += 1;
                }
            }
            Ok(hits as f64 / trials as f64)
        }
        Err(e) => Err(e),
    }
}

/// One exact uniform draw from a built-in body.
pub(crate) fn pushforward_point(body: &ConvexBody, rng: &mut ChaCha8Rng, x: &mut [f64]) {
    let n = body.dim();
    match body.kind() {
        BodyKind::Ball { radius } => {
            gaussian_direction(rng, n, x);
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            for v in x.iter_mut() {
                *v *= r;
            }
        }
        BodyKind::Ellipsoid { semi_axes } => {
            gaussian_direction(rng, n, x);
            let r = rng.random::<f64>().powf(1.0 / n as f64);
            for (v, a) in x.iter_mut().zip(semi_axes) {
                *v *= r * a;
            }
        }
        BodyKind::Cube { half_side } => {
            for v in x.iter_mut() {
                *v = half_side * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        BodyKind::LpBall { p, scale } => {
            // G / (|G|_p^p + E)^{1/p} with G_i ~ exp(-|t|^p) is uniform on B_p^n.
            let p = *p;
            let gamma = Gamma::new(1.0 / p, 1.0).expect("valid gamma shape");
            let mut s = 0.0;
            for v in x.iter_mut() {
                let w: f64 = gamma.sample(rng);
                s += w;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *v = sign * w.powf(1.0 / p);
            }
            let e: f64 = Exp1.sample(rng);
            let denom = (s + e).powf(1.0 / p);
            for v in x.iter_mut() {
                *v *= scale / denom;
            }
        }
        BodyKind::Simplex { scale } => {
            let c = scale / (n as f64 + 1.0);
            let e0: f64 = Exp1.sample(rng);
            let mut s = e0;
            for v in x.iter_mut() {
                let e: f64 = Exp1.sample(rng);
                *v = e;
                s += e;
            }
            for v in x.iter_mut() {
                *v = scale * *v / s - c;
            }
        }
        BodyKind::GenericSmooth(_) => unreachable!("pushforward is rejected for generic bodies"),
    }
}

/// A point with a positive importance weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSample {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// `sigma_∂Ω`: the pushforward of the uniform measure under `x -> x / g(x)`.
pub fn sample_cone(sampler: &UniformSampler, plan: &McPlan) -> Vec<Vec<f64>> {
    let body = &sampler.region().body;
    let mut out = Vec::with_capacity(plan.samples);
    for c in 0..plan.chunks() {
        let count = CHUNK.min(plan.samples - c * CHUNK);
        let mut rng = chunk_rng(plan.seed, plan.stream, c as u64);
        sampler.for_each_point(&mut rng, count, |x| {
            let g = body.gauge_unchecked(x);
            out.push(x.iter().map(|v| v / g).collect());
        });
    }
    out
}

/// `1 / <y, nu(y)>` at a boundary point, i.e. `|∇g(y)|`.
pub fn surface_weight(body: &ConvexBody, y: &[f64]) -> Result<f64> {
    let grad = body.gauge_gradient_ae(y);
    let gn = norm(&grad);
    let support = body.gauge_unchecked(y) / gn;
    if !(support >= 1e-12) {
        return Err(KlsError::DegenerateNormal(support));
    }
    Ok(gn)
}

/// Raw draws of the surface measure `λ_∂Ω`: direct face sampling with unit
/// weights on the cube and simplex, cone samples with weights
/// `|∇g(y)| ∝ 1/<y, nu>` otherwise.
#[derive(Debug, Clone)]
pub struct SurfaceSampler {
    uniform: UniformSampler,
    faces: Option<(Vec<FacePatch>, Vec<f64>)>,
}

impl SurfaceSampler {
    pub fn new(uniform: UniformSampler) -> Result<Self> {
        let region = uniform.region();
        let faces = if region.body.is_polytope() && !region.orthant && region.body.facets().is_some() {
            let patches = region.body.face_patches()?;
            let total: f64 = patches.iter().map(|p| p.2).sum();
            let cumulative: Vec<f64> = patches
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p.2 / total;
                    Some(*acc)
                })
                .collect();
            Some((patches.into_iter().map(|p| p.1).collect(), cumulative))
        } else {
            None
        };
        Ok(SurfaceSampler { uniform, faces })
    }

    pub fn uniform(&self) -> &UniformSampler {
        &self.uniform
    }

    pub fn for_each_point(&self, rng: &mut ChaCha8Rng, count: usize, mut emit: impl FnMut(&[f64], f64)) -> Result<()> {
        let body = &self.uniform.region().body;
        let n = body.dim();
        if let Some((patches, cumulative)) = &self.faces {
            for _ in 0..count {
                let u: f64 = rng.random();
                let k = cumulative.iter().position(|&c| u < c).unwrap_or(patches.len() - 1);
                emit(&patches[k].sample(n, rng), 1.0);
            }
            return Ok(());
        }
        let mut err = None;
        let mut y = vec![0.0; n];
        self.uniform.for_each_point(rng, count, |x| {
            let g = body.gauge_unchecked(x);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = xi / g;
            }
            match surface_weight(body, &y) {
                Ok(w) => emit(&y, w),
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        });
        err.map_or(Ok(()), Err)
    }
}

/// Normalized surface measure `λ_∂Ω` as weighted samples with weights of
/// mean 1 within each chunk.
pub fn sample_surface(sampler: &UniformSampler, plan: &McPlan) -> Result<Vec<WeightedSample>> {
    let surface = SurfaceSampler::new(sampler.clone())?;
    let mut out = Vec::with_capacity(plan.samples);
    for c in 0..plan.chunks() {
        let count = CHUNK.min(plan.samples - c * CHUNK);
        let mut rng = chunk_rng(plan.seed, plan.stream, c as u64);
        let start = out.len();
        surface.for_each_point(&mut rng, count, |y, w| out.push(WeightedSample { point: y.to_vec(), weight: w }))?;
        let chunk = &mut out[start..];
        let mean = chunk.iter().map(|s| s.weight).sum::<f64>() / chunk.len() as f64;
        for s in chunk.iter_mut() {
            s.weight /= mean;
        }
    }
    Ok(out)
}
