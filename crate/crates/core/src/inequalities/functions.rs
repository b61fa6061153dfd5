//! Seeded test functions with gradient oracles.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::error::{KlsError, Result};
use crate::linalg::{dot, norm};
use crate::measures::{stream_id, Region};

/// Bumped whenever the generated parameters change.
pub const CORPUS_VERSION: u32 = 1;
pub const FUNCTIONS_PER_FAMILY: usize = 20;
/// Spot checks of a vanishing condition.
pub const VANISHING_CHECKS: usize = 100;
pub const VANISHING_TOL: f64 = 1e-9;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes `∇f(x)` into the output slice.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Quadratic,
    RadialBump,
    MaxAffine,
    HarmonicPoly,
    BoundaryVanishingProduct,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Linear,
        Family::Quadratic,
        Family::RadialBump,
        Family::MaxAffine,
        Family::HarmonicPoly,
        Family::BoundaryVanishingProduct,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Quadratic => "quadratic",
            Family::RadialBump => "radial_bump",
            Family::MaxAffine => "max_affine",
            Family::HarmonicPoly => "harmonic_poly",
            Family::BoundaryVanishingProduct => "boundary_vanishing_product",
        }
    }
}

/// Where a test function is known to vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vanishing {
    Nowhere,
    /// On the boundary of the named body.
    Boundary(String),
    /// On the coordinate hyperplanes.
    CoordinateHyperplanes,
}

#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub family: Family,
    pub value: ValueFn,
    pub gradient: GradientFn,
    /// Lipschitz constant on the body the function was built for.
    pub lipschitz_bound: Option<f64>,
    pub vanishing: Vanishing,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("vanishing", &self.vanishing)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        family: Family,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            family,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            lipschitz_bound: None,
            vanishing: Vanishing::Nowhere,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_bound = Some(l);
        self
    }

    pub fn with_vanishing(mut self, v: Vanishing) -> Self {
        self.vanishing = v;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        (self.gradient)(x, &mut g);
        g
    }

    /// `f ≡ c`.
    pub fn constant(c: f64) -> Self {
        TestFunction::new(format!("constant({c})"), Family::Linear, move |_| c, |_, g| g.fill(0.0))
            .with_lipschitz(0.0)
    }

    /// `f ≡ 0`, which vanishes everywhere.
    pub fn zero(body: &ConvexBody) -> Self {
        Self::constant(0.0).with_vanishing(Vanishing::Boundary(body.label()))
    }

    /// `f(x) = <theta, x> + c`.
    pub fn linear(theta: Vec<f64>, c: f64) -> Self {
        let l = norm(&theta);
        let t2 = theta.clone();
        TestFunction::new(
            format!("linear({theta:?},{c})"),
            Family::Linear,
            move |x| dot(&theta, x) + c,
            move |_, g| g.copy_from_slice(&t2),
        )
        .with_lipschitz(l)
    }

    /// `f = 1 - g(x)^2` times `exp(<c, x>)`, vanishing on the boundary of `body`.
    pub fn boundary_product(body: &ConvexBody, c: Vec<f64>) -> Result<Self> {
        let r_out = body.outer_radius();
        let r_in = body.in_radius()?;
        let cn = norm(&c);
        let b1 = Arc::new(body.clone());
        let b2 = b1.clone();
        let c2 = c.clone();
        Ok(TestFunction::new(
            format!("boundary_product({},{c:?})", body.label()),
            Family::BoundaryVanishingProduct,
            move |x| {
                let g = b1.gauge_unchecked(x);
                (1.0 - g * g) * dot(&c, x).exp()
            },
            move |x, out| {
                let g = b2.gauge_unchecked(x);
                let e = dot(&c2, x).exp();
                let s = (1.0 - g * g) * e;
                for (o, ci) in out.iter_mut().zip(&c2) {
                    *o = s * ci;
                }
                if g > 0.0 {
                    let dg = b2.gauge_gradient_ae(x);
                    for (o, d) in out.iter_mut().zip(&dg) {
                        *o -= 2.0 * g * e * d;
                    }
                }
            },
        )
        .with_lipschitz((cn * r_out).exp() * (2.0 / r_in + cn))
        .with_vanishing(Vanishing::Boundary(body.label())))
    }

    /// `f = x_1 ⋯ x_n (1 - g(x)^2)^j exp(<c, x>)` with `j ∈ {0, 1}`, vanishing on
    /// the coordinate hyperplanes (and on `∂K` when `j = 1`).
    pub fn coordinate_product(body: &ConvexBody, c: Vec<f64>, boundary_factor: bool) -> Result<Self> {
        let r_out = body.outer_radius();
        let r_in = body.in_radius()?;
        let n = body.dim();
        let cn = norm(&c);
        let b1 = Arc::new(body.clone());
        let b2 = b1.clone();
        let c2 = c.clone();
        let j = if boundary_factor { 1.0 } else { 0.0 };
        let nf = n as f64;
        let lip = (cn * r_out).exp() * (nf.sqrt() * r_out.powi(n as i32 - 1) + r_out.powi(n as i32) * (2.0 * j / r_in + cn));
        Ok(TestFunction::new(
            format!("coordinate_product({},{c:?},{})", body.label(), boundary_factor as u8),
            Family::BoundaryVanishingProduct,
            move |x| {
                let g = b1.gauge_unchecked(x);
                let w = if boundary_factor { 1.0 - g * g } else { 1.0 };
                x.iter().product::<f64>() * w * dot(&c, x).exp()
            },
            move |x, out| {
                let g = b2.gauge_unchecked(x);
                let e = dot(&c2, x).exp();
                let w = if boundary_factor { 1.0 - g * g } else { 1.0 };
                let prod: f64 = x.iter().product();
                for k in 0..out.len() {
                    let others: f64 = x.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).product();
                    out[k] = (others * w + prod * w * c2[k]) * e;
                }
                if boundary_factor && g > 0.0 {
                    let dg = b2.gauge_gradient_ae(x);
                    for (o, d) in out.iter_mut().zip(&dg) {
                        *o -= prod * e * 2.0 * g * d;
                    }
                }
            },
        )
        .with_lipschitz(lip)
        .with_vanishing(Vanishing::CoordinateHyperplanes))
    }

    /// Checks the vanishing condition at [`VANISHING_CHECKS`] seeded points of `region`.
    pub fn check_vanishing(&self, region: &Region, seed: u64) -> Result<()> {
        let body = &region.body;
        let n = body.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream_id("vanishing"));
        match &self.vanishing {
            Vanishing::Nowhere => Err(KlsError::Precondition(format!("{} is not declared vanishing", self.name))),
            Vanishing::Boundary(label) => {
                if *label != body.label() {
                    return Err(KlsError::Precondition(format!(
                        "{} vanishes on {label}, not on {}",
                        self.name,
                        body.label()
                    )));
                }
                for _ in 0..VANISHING_CHECKS {
                    let mut u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    if region.orthant {
                        u.iter_mut().for_each(|v| *v = v.abs());
                    }
                    let g = body.gauge_unchecked(&u);
                    let y: Vec<f64> = u.iter().map(|v| v / g).collect();
                    self.spot(&y)?;
                }
                Ok(())
            }
            Vanishing::CoordinateHyperplanes => {
                for _ in 0..VANISHING_CHECKS {
                    let u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
                    let g = body.gauge_unchecked(&u);
                    let t: f64 = rng.random();
                    let mut x: Vec<f64> = u.iter().map(|v| t * v / g).collect();
                    x[rng.random_range(0..n)] = 0.0;
                    self.spot(&x)?;
                }
                Ok(())
            }
        }
    }

    fn spot(&self, x: &[f64]) -> Result<()> {
        let v = self.eval(x);
        if v.abs() > VANISHING_TOL {
            return Err(KlsError::Precondition(format!(
                "{} does not vanish where required: f({x:?}) = {v:e}",
                self.name
            )));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Two orthonormal vectors.
fn orthonormal_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let u = gaussian_vec(rng, n, 1.0);
        let mut v = gaussian_vec(rng, n, 1.0);
        let un = norm(&u);
        let u: Vec<f64> = u.iter().map(|a| a / un).collect();
        let p = dot(&u, &v);
        v.iter_mut().zip(&u).for_each(|(b, a)| *b -= p * a);
        let vn = norm(&v);
        if vn > 1e-3 {
            return (u, v.iter().map(|b| b / vn).collect());
        }
    }
}

fn cpow(re: f64, im: f64, k: u32) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..k {
        (a, b) = (a * re - b * im, a * im + b * re);
    }
    (a, b)
}

/// `count` seeded members of `family`, scaled to `body`.
pub fn family_corpus(body: &ConvexBody, family: Family, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let n = body.dim();
    if n < 2 {
        return Err(KlsError::InvalidInput("test-function corpus needs n >= 2".into()));
    }
    let r_out = body.outer_radius();
    let r_in = body.in_radius()?;
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream_id(family.as_str()) ^ CORPUS_VERSION as u64);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let name = format!("{}#{i}", family.as_str());
        let f = match family {
            Family::Linear => {
                let theta = gaussian_vec(&mut rng, n, 1.0 / nf.sqrt());
                let c = rng.random_range(-1.0..1.0);
                TestFunction::linear(theta, c)
            }
            Family::Quadratic => {
                let mut a = vec![vec![0.0; n]; n];
                for r in 0..n {
                    for s in 0..=r {
                        let v = rng.sample::<f64, _>(StandardNormal) / (nf.sqrt() * r_out);
                        a[r][s] = v;
                        a[s][r] = v;
                    }
                }
                let b = gaussian_vec(&mut rng, n, 1.0 / nf.sqrt());
                let frob = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                let lip = frob * r_out + norm(&b);
                let (a2, b2) = (a.clone(), b.clone());
                TestFunction::new(
                    "",
                    family,
                    move |x| a.iter().zip(x).map(|(row, xi)| 0.5 * xi * dot(row, x)).sum::<f64>() + dot(&b, x),
                    move |x, g| {
                        for (k, gk) in g.iter_mut().enumerate() {
                            *gk = dot(&a2[k], x) + b2[k];
                        }
                    },
                )
                .with_lipschitz(lip)
            }
            Family::RadialBump => {
                let dir = gaussian_vec(&mut rng, n, 1.0);
                let dn = norm(&dir);
                let t = 0.5 * r_in * rng.random::<f64>().powf(1.0 / nf);
                let a: Vec<f64> = dir.iter().map(|v| t * v / dn).collect();
                let s = r_out * rng.random_range(0.3..1.0);
                let a2 = a.clone();
                let value = move |x: &[f64]| {
                    let d2: f64 = x.iter().zip(&a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum();
                    (-d2 / (2.0 * s * s)).exp()
                };
                let v2 = value.clone();
                TestFunction::new("", family, value, move |x, g| {
                    let e = v2(x);
                    for ((gk, xk), ak) in g.iter_mut().zip(x).zip(&a2) {
                        *gk = -(xk - ak) / (s * s) * e;
                    }
                })
                .with_lipschitz((-0.5f64).exp() / s)
            }
            Family::MaxAffine => {
                let pieces: Vec<(Vec<f64>, f64)> = (0..3)
                    .map(|_| (gaussian_vec(&mut rng, n, 1.0 / nf.sqrt()), r_out * rng.random_range(-0.5..0.5)))
                    .collect();
                let tau = 0.1 * r_out;
                let lip = pieces.iter().map(|p| norm(&p.0)).fold(0.0, f64::max);
                let p2 = pieces.clone();
                // Smoothed maximum τ log Σ exp(ℓ_k / τ).
                let levels = move |ps: &[(Vec<f64>, f64)], x: &[f64]| -> (Vec<f64>, f64) {
                    let l: Vec<f64> = ps.iter().map(|(a, b)| (dot(a, x) + b) / tau).collect();
                    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (l, m)
                };
                TestFunction::new(
                    "",
                    family,
                    move |x| {
                        let (l, m) = levels(&pieces, x);
                        tau * (m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
                    },
                    move |x, g| {
                        let (l, m) = levels(&p2, x);
                        let w: Vec<f64> = l.iter().map(|v| (v - m).exp()).collect();
                        let z: f64 = w.iter().sum();
                        g.fill(0.0);
                        for ((a, _), wk) in p2.iter().zip(&w) {
                            for (gi, ai) in g.iter_mut().zip(a) {
                                *gi += wk / z * ai;
                            }
                        }
                    },
                )
                .with_lipschitz(lip)
            }
            Family::HarmonicPoly => {
                // Re or Im of (<u,x> + i<v,x>)^k with u ⟂ v unit, harmonic in R^n.
                let (u, v) = orthonormal_pair(&mut rng, n);
                let k = 1 + (i % 4) as u32;
                let imaginary = (i / 4) % 2 == 1;
                let s = r_out.powi(1 - k as i32);
                let (u2, v2) = (u.clone(), v.clone());
                TestFunction::new(
                    "",
                    family,
                    move |x| {
                        let (a, b) = cpow(dot(&u, x), dot(&v, x), k);
                        s * if imaginary { b } else { a }
                    },
                    move |x, g| {
                        let (a, b) = cpow(dot(&u2, x), dot(&v2, x), k - 1);
                        let (a, b) = (k as f64 * a, k as f64 * b);
                        // ∂ Re = a u - b v, ∂ Im = b u + a v
                        let (cu, cv) = if imaginary { (b, a) } else { (a, -b) };
                        for ((gi, ui), vi) in g.iter_mut().zip(&u2).zip(&v2) {
                            *gi = s * (cu * ui + cv * vi);
                        }
                    },
                )
                .with_lipschitz(k as f64)
            }
            Family::BoundaryVanishingProduct => {
                let c = gaussian_vec(&mut rng, n, 0.5 / (r_out * nf.sqrt()));
                TestFunction::boundary_product(body, c)?
            }
        };
        out.push(TestFunction { name, ..f });
    }
    Ok(out)
}

/// [`FUNCTIONS_PER_FAMILY`] members of every family.
pub fn corpus(body: &ConvexBody, seed: u64) -> Result<Vec<TestFunction>> {
    let mut out = Vec::new();
    for family in Family::ALL {
        out.extend(family_corpus(body, family, FUNCTIONS_PER_FAMILY, seed)?);
    }
    Ok(out)
}

/// Functions vanishing on the coordinate hyperplanes, for orthant regions.
pub fn orthant_corpus(body: &ConvexBody, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let n = body.dim();
    let r_out = body.outer_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream_id("orthant") ^ CORPUS_VERSION as u64);
    (0..count)
        .map(|i| {
            let c = gaussian_vec(&mut rng, n, 0.5 / (r_out * (n as f64).sqrt()));
            let f = TestFunction::coordinate_product(body, c, i % 2 == 1)?;
            Ok(TestFunction { name: format!("coordinate_product#{i}"), ..f })
        })
        .collect()
}
