//! Seeded samplers and quadratures for the uniform, cone and surface
//! measures of a body and for product log-concave laws.

pub mod dump;
pub mod mc;
pub mod mu_p;
pub mod rays;
pub mod uniform;


use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mc::{batched_sums, stream_id, BatchSums, McPlan, MomentReport, BATCHES, CHUNK, MIN_SAMPLES};
pub use mu_p::{Custom1d, MuP};
pub use rays::{polar_quadrature, ray_moments, DirectionRule, RadialRule, RayMoments, RayScheme};
pub use uniform::{
    sample_cone, sample_surface, surface_weight, Region, SurfaceSampler, UniformMethod, UniformSampler, WeightedSample,
};

use crate::error::{KlsError, Result};

/// What a [`MeasureSampler`] draws from.
#[derive(Debug, Clone)]
pub enum Target {
    Uniform(Region),
    Cone(Region),
    Surface(Region),
    MuP { p: f64, n: usize },
    Custom1d { law: Custom1d, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Rejection,
    HitAndRun,
    Pushforward,
    InverseCdf,
}

#[derive(Debug, Clone)]
enum Engine {
    Points(UniformSampler),
    Surface(SurfaceSampler),
    MuP(MuP),
    Custom(Custom1d),
}

/// A seeded sampler: identical target, method and seed give identical
/// streams for any worker count.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    target: Target,
    method: SamplerMethod,
    pub seed: u64,
    engine: Engine,
}

fn body_method(m: UniformMethod) -> SamplerMethod {
    match m {
        UniformMethod::Pushforward => SamplerMethod::Pushforward,
        UniformMethod::Rejection => SamplerMethod::Rejection,
        UniformMethod::HitAndRun => SamplerMethod::HitAndRun,
    }
}

impl MeasureSampler {
    /// `method = None` picks the default for the target.
    pub fn new(target: Target, method: Option<SamplerMethod>, seed: u64) -> Result<Self> {
        let uniform = |region: &Region| -> Result<UniformSampler> {
            match method {
                None => UniformSampler::auto(region.clone()),
                Some(SamplerMethod::Rejection) => UniformSampler::new(region.clone(), UniformMethod::Rejection),
                Some(SamplerMethod::HitAndRun) => UniformSampler::new(region.clone(), UniformMethod::HitAndRun),
                Some(SamplerMethod::Pushforward) => UniformSampler::new(region.clone(), UniformMethod::Pushforward),
                Some(SamplerMethod::InverseCdf) => {
                    Err(KlsError::InvalidInput("inverse_cdf only applies to one-dimensional laws".into()))
                }
            }
        };
        let engine = match &target {
            Target::Uniform(r) | Target::Cone(r) => Engine::Points(uniform(r)?),
            Target::Surface(r) => Engine::Surface(SurfaceSampler::new(uniform(r)?)?),
            Target::MuP { .. } | Target::Custom1d { .. } => {
                if !matches!(method, None | Some(SamplerMethod::InverseCdf)) {
                    return Err(KlsError::InvalidInput("product laws are sampled by inverse_cdf".into()));
                }
                match &target {
                    Target::MuP { p, .. } => Engine::MuP(MuP::new(*p)?),
                    Target::Custom1d { law, .. } => Engine::Custom(law.clone()),
                    _ => unreachable!(),
                }
            }
        };
        let method = match &engine {
            Engine::Points(s) => body_method(s.method()),
            Engine::Surface(s) => body_method(s.uniform().method()),
            _ => SamplerMethod::InverseCdf,
        };
        Ok(MeasureSampler { target, method, seed, engine })
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn method(&self) -> SamplerMethod {
        self.method
    }

    pub fn dim(&self) -> usize {
        match &self.target {
            Target::Uniform(r) | Target::Cone(r) | Target::Surface(r) => r.dim(),
            Target::MuP { n, .. } | Target::Custom1d { n, .. } => *n,
        }
    }

    /// Draws `count` weighted points of one chunk (weights unnormalized).
    pub fn for_each_weighted(&self, rng: &mut ChaCha8Rng, count: usize, mut emit: impl FnMut(&[f64], f64)) -> Result<()> {
        let n = self.dim();
        match (&self.engine, &self.target) {
            (Engine::Points(s), Target::Cone(r)) => {
                let mut y = vec![0.0; n];
                s.for_each_point(rng, count, |x| {
                    let g = r.body.gauge_unchecked(x);
                    for (yi, xi) in y.iter_mut().zip(x) {
                        *yi = xi / g;
                    }
                    emit(&y, 1.0);
                });
                Ok(())
            }
            (Engine::Points(s), _) => {
                s.for_each_point(rng, count, |x| emit(x, 1.0));
                Ok(())
            }
            (Engine::Surface(s), _) => s.for_each_point(rng, count, emit),
            (Engine::MuP(law), _) => {
                mu_p::for_each_product_point(law, n, rng, count, |x| emit(x, 1.0));
                Ok(())
            }
            (Engine::Custom(law), _) => {
                mu_p::for_each_product_point(law, n, rng, count, |x| emit(x, 1.0));
                Ok(())
            }
        }
    }

    /// `samples` weighted points, weights normalized to mean 1 per chunk.
    pub fn sample(&self, samples: usize) -> Result<Vec<WeightedSample>> {
        let plan = McPlan::new(samples, self.seed);
        let mut out = Vec::with_capacity(samples);
        for c in 0..plan.chunks() {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut rng = mc::chunk_rng(plan.seed, plan.stream, c as u64);
            let start = out.len();
            self.for_each_weighted(&mut rng, count, |x, w| out.push(WeightedSample { point: x.to_vec(), weight: w }))?;
            let chunk = &mut out[start..];
            let mean = chunk.iter().map(|s| s.weight).sum::<f64>() / chunk.len() as f64;
            for s in chunk.iter_mut() {
                s.weight /= mean;
            }
        }
        Ok(out)
    }
}

/// Plug-in variance of `f` under the sampler's measure with a batch-means
/// error bar. Values are centred at `f(0)` before accumulation so that
/// constants give exactly zero.
pub fn variance_of<F>(f: F, sampler: &MeasureSampler, samples: usize) -> Result<MomentReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let plan = McPlan::new(samples, sampler.seed);
    let shift = f(&vec![0.0; sampler.dim()]);
    let sums = batched_sums(&plan, 3, |rng, count, emit| {
        sampler.for_each_weighted(rng, count, |x, w| {
            let v = f(x) - shift;
            emit(&[w, w * v, w * v * v]);
        })
    })?;
    let correction = samples as f64 / (samples as f64 - 1.0);
    Ok(sums.report(|m| {
        let mean = m[1] / m[0];
        (correction * (m[2] / m[0] - mean * mean)).max(0.0)
    }))
}
