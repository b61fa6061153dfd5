//! Integration over a body ray by ray.
//!
//! A point of a star body is `x = r y` with `y` on the boundary and
//! `r = g(x)` in `[0, 1]`. Under `λ_Ω` the direction `y` has the cone law
//! and `r` has density `n r^{n-1}`, independently. Directions come either
//! from uniform samples (`y = x / g(x)`) or from a deterministic grid; the
//! radius is either the sampled `g(x)` or integrated with Gauss–Legendre,
//! which removes the radial variance of integrands singular at the origin.

use rand_chacha::ChaCha8Rng;

use super::mc::{batched_sums, BatchSums, McPlan, MomentReport};
use super::uniform::{Region, UniformSampler};
use crate::body::BodyKind;
use crate::error::{KlsError, Result};
use crate::quadrature::GaussLegendre;
use crate::sphere::SphereGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionRule {
    MonteCarlo(McPlan),
    /// Deterministic boundary grid with `m` nodes per coordinate (n <= 3).
    Grid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialRule {
    /// Use the sampled radius (single node of weight 1).
    Sampled,
    /// Gauss–Legendre with this many nodes against `n r^{n-1} dr`.
    Gauss(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayScheme {
    pub directions: DirectionRule,
    pub radial: RadialRule,
}

impl RayScheme {
    pub fn monte_carlo(plan: McPlan) -> Self {
        RayScheme { directions: DirectionRule::MonteCarlo(plan), radial: RadialRule::Sampled }
    }

    pub fn rao_blackwell(plan: McPlan, nodes: usize) -> Self {
        RayScheme { directions: DirectionRule::MonteCarlo(plan), radial: RadialRule::Gauss(nodes) }
    }

    pub fn quadrature(m: usize, nodes: usize) -> Self {
        RayScheme { directions: DirectionRule::Grid(m), radial: RadialRule::Gauss(nodes) }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.directions, DirectionRule::Grid(_))
    }
}

/// Means of per-ray quantities, with batch sums when sampled.
#[derive(Debug, Clone)]
pub struct RayMoments {
    means: Vec<f64>,
    batches: Option<BatchSums>,
}

impl RayMoments {
    /// Deterministic means.
    pub fn from_means(means: Vec<f64>) -> Self {
        RayMoments { means, batches: None }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn report<F: Fn(&[f64]) -> f64>(&self, phi: F) -> MomentReport {
        match &self.batches {
            Some(b) => b.report(phi),
            None => MomentReport::exact(phi(&self.means)),
        }
    }
}

/// Radial nodes `(r, w)` with `sum w r^k = n / (n + k)`.
pub fn radial_nodes(n: usize, q: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(q)
        .mapped(0.0, 1.0)
        .map(|(r, w)| (r, w * n as f64 * r.powi(n as i32 - 1)))
        .collect()
}

/// Boundary directions `y` with cone-measure weights summing to 1.
pub fn direction_grid(region: &Region, m: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let body = &region.body;
    let n = body.dim();
    if n > 3 {
        return Err(KlsError::Unsupported(format!("direction grids need n <= 3 (got {n})")));
    }
    let mut out: Vec<(Vec<f64>, f64)> = match body.kind() {
        BodyKind::Cube { half_side } if region.orthant => {
            let a = *half_side;
            let gl: Vec<(f64, f64)> = GaussLegendre::new(m).mapped(0.0, a).collect();
            let mut out = Vec::new();
            for axis in 0..n {
                let free: Vec<usize> = (0..n).filter(|i| *i != axis).collect();
                let mut push = |coords: &[(f64, f64)]| {
                    let mut y = vec![0.0; n];
                    y[axis] = a;
                    let mut w = a;
                    for (&i, &(t, wt)) in free.iter().zip(coords) {
                        y[i] = t;
                        w *= wt;
                    }
                    out.push((y, w));
                };
                if free.len() == 1 {
                    for &c in &gl {
                        push(&[c]);
                    }
                } else {
                    for &c in &gl {
                        for &d in &gl {
                            push(&[c, d]);
                        }
                    }
                }
            }
            out
        }
        BodyKind::Cube { .. } | BodyKind::Simplex { .. } => {
            let facets = body.facets().expect("polytope facets");
            body.face_quadrature(m)?
                .into_iter()
                .map(|(y, da, k)| (y, facets[k].offset * da))
                .collect()
        }
        _ => {
            let grid = if region.orthant { SphereGrid::orthant(n, m)? } else { SphereGrid::new(n, m)? };
            grid.points
                .iter()
                .zip(&grid.weights)
                .map(|(u, w)| {
                    let g = body.gauge_unchecked(u);
                    (u.iter().map(|v| v / g).collect(), w * g.powi(-(n as i32)))
                })
                .collect()
        }
    };
    let total: f64 = out.iter().map(|d| d.1).sum();
    for d in out.iter_mut() {
        d.1 /= total;
    }
    Ok(out)
}

/// Runs `per_ray(y, nodes, out)` over the rays of `scheme`, where `nodes`
/// are `(r, w)` pairs whose weights integrate a function of `r y` against
/// the radial law, and returns the means of the `k` outputs under `λ_Ω`.
pub fn ray_moments<F>(region: &Region, scheme: &RayScheme, k: usize, per_ray: F) -> Result<RayMoments>
where
    F: Fn(&[f64], &[(f64, f64)], &mut [f64]) -> Result<()> + Sync,
{
    let n = region.dim();
    let fixed = match scheme.radial {
        RadialRule::Gauss(q) => Some(radial_nodes(n, q)),
        RadialRule::Sampled => None,
    };
    match scheme.directions {
        DirectionRule::Grid(m) => {
            let fixed = fixed.ok_or_else(|| {
                KlsError::InvalidInput("grid directions need a quadrature radial rule".into())
            })?;
            let mut means = vec![0.0; k];
            let mut out = vec![0.0; k];
            for (y, w) in direction_grid(region, m)? {
                out.iter_mut().for_each(|v| *v = 0.0);
                per_ray(&y, &fixed, &mut out)?;
                for (s, v) in means.iter_mut().zip(&out) {
                    *s += w * v;
                }
            }
            Ok(RayMoments { means, batches: None })
        }
        DirectionRule::MonteCarlo(plan) => {
            let sampler = UniformSampler::auto(region.clone())?;
            let body = &region.body;
            let sums = batched_sums(&plan, k, |rng: &mut ChaCha8Rng, count, emit| {
                let mut err = None;
                let mut y = vec![0.0; n];
                let mut out = vec![0.0; k];
                let mut sampled = [(0.0, 1.0)];
                sampler.for_each_point(rng, count, |x| {
                    let g = body.gauge_unchecked(x);
                    for (yi, xi) in y.iter_mut().zip(x) {
                        *yi = xi / g;
                    }
                    out.iter_mut().for_each(|v| *v = 0.0);
                    let nodes: &[(f64, f64)] = match &fixed {
                        Some(f) => f,
                        None => {
                            sampled[0].0 = g;
                            &sampled
                        }
                    };
                    if let Err(e) = per_ray(&y, nodes, &mut out) {
                        err.get_or_insert(e);
                    }
                    emit(&out);
                });
                err.map_or(Ok(()), Err)
            })?;
            Ok(RayMoments { means: sums.means(), batches: Some(sums) })
        }
    }
}

/// Deterministic `∫_Ω f dλ_Ω` for `n <= 3`: boundary grid with `m` nodes per
/// coordinate times a `radial_degree`-point radial Gauss rule.
pub fn polar_quadrature<F>(region: &Region, integrand: F, radial_degree: usize, m: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let scheme = RayScheme::quadrature(m, radial_degree);
    let n = region.dim();
    let mom = ray_moments(region, &scheme, 1, |y, nodes, out| {
        let mut x = vec![0.0; n];
        for &(r, w) in nodes {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi = r * yi;
            }
            out[0] += w * integrand(&x);
        }
        Ok(())
    })?;
    Ok(mom.means()[0])
}
