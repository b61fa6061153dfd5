//! One-dimensional log-concave laws by inverse CDF on a monotone cubic
//! Hermite spline, and their product measures.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mc::{chunk_rng, McPlan, CHUNK};
use crate::error::{KlsError, Result};
use crate::quadrature::adaptive_gk15;
use crate::special::{gamma, gamma_lr, gamma_ur, ln_gamma};

pub const SPLINE_KNOTS: usize = 4096;
/// Mass left outside the tabulated range.
pub const TAIL_MASS: f64 = 1e-12;

/// Monotone CDF tabulated on knots with exact derivatives.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(knots: Vec<f64>, cdf: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != cdf.len() || cdf.len() != pdf.len() {
            return Err(KlsError::InvalidInput("spline tables must have equal length >= 2".into()));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KlsError::InvalidInput("CDF table is not monotone".into()));
        }
        Ok(InverseCdf { knots, cdf, pdf })
    }

    pub fn lower(&self) -> f64 {
        self.cdf[0]
    }

    pub fn upper(&self) -> f64 {
        *self.cdf.last().expect("non-empty")
    }

    fn hermite(&self, i: usize, s: f64) -> (f64, f64) {
        let h = self.knots[i + 1] - self.knots[i];
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.pdf[i] * h, self.pdf[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let d = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * m1) / h;
        (v, d)
    }

    /// Spline value at `x` inside the knot range.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return self.cdf[i],
            Err(i) => i.clamp(1, self.knots.len() - 1) - 1,
        };
        let h = self.knots[i + 1] - self.knots[i];
        self.hermite(i, ((x - self.knots[i]) / h).clamp(0.0, 1.0)).0
    }

    /// Solves `spline(x) = u` for `u` within `[lower, upper]`.
    pub fn invert(&self, u: f64) -> f64 {
        let i = match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => return self.knots[i],
            Err(i) => i.clamp(1, self.cdf.len() - 1) - 1,
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let h = self.knots[i + 1] - self.knots[i];
        let span = self.cdf[i + 1] - self.cdf[i];
        let mut s = if span > 0.0 { ((u - self.cdf[i]) / span).clamp(0.0, 1.0) } else { 0.5 };
        // Safeguarded Newton on the local cubic.
        for _ in 0..60 {
            let (v, d) = self.hermite(i, s);
            let r = v - u;
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - r / (d * h);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() < 1e-15 {
                s = next;
                break;
            }
            s = next;
        }
        self.knots[i] + s * h
    }
}

/// `mu_p`: density `exp(-|t|^p) / (2 Gamma(1 + 1/p))` on the line.
#[derive(Debug, Clone)]
pub struct MuP {
    p: f64,
    /// Law of `|T|`.
    spline: InverseCdf,
}

impl MuP {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(KlsError::InvalidParameter(format!("mu_p needs p in [1, inf), got {p}")));
        }
        let a = 1.0 / p;
        // |T|^p ~ Gamma(1/p): choose s_max with Q(1/p, s_max^p) = TAIL_MASS.
        let x_max = crate::special::bisect(|x| gamma_ur(a, x) - TAIL_MASS, 1e-3, 200.0, 1e-12)?;
        let s_max = x_max.powf(a);
        let g1 = gamma(1.0 + a);
        let knots: Vec<f64> = (0..SPLINE_KNOTS).map(|k| s_max * k as f64 / (SPLINE_KNOTS - 1) as f64).collect();
        let cdf = knots.iter().map(|s| if *s == 0.0 { 0.0 } else { gamma_lr(a, s.powf(p)) }).collect();
        let pdf = knots.iter().map(|s| (-s.powf(p)).exp() / g1).collect();
        Ok(MuP { p, spline: InverseCdf::new(knots, cdf, pdf)? })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn density(&self, t: f64) -> f64 {
        (-t.abs().powf(self.p)).exp() / (2.0 * gamma(1.0 + 1.0 / self.p))
    }

    /// `|T|` from a uniform `u` in `(0, 1)`.
    pub fn abs_quantile(&self, u: f64) -> f64 {
        if u <= self.spline.upper() {
            return self.spline.invert(u);
        }
        // Tail: Q(a, x) ~ x^{a-1} e^{-x} / Gamma(a); Newton in x on the log.
        let a = 1.0 / self.p;
        let target = (1.0 - u).max(f64::MIN_POSITIVE).ln() + ln_gamma(a);
        let mut x = -target;
        for _ in 0..50 {
            let f = (a - 1.0) * x.ln() - x - target;
            let d = (a - 1.0) / x - 1.0;
            let step = f / d;
            x -= step;
            if step.abs() < 1e-14 * x {
                break;
            }
        }
        x.powf(a)
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let s = self.abs_quantile(u);
        if rng.random::<bool>() {
            s
        } else {
            -s
        }
    }

    /// Second moment `Gamma(3/p) / Gamma(1/p)`.
    pub fn variance(&self) -> f64 {
        (ln_gamma(3.0 / self.p) - ln_gamma(1.0 / self.p)).exp()
    }
}

/// A 1-D law given by an unnormalized log-density on `[lo, hi]`.
#[derive(Clone)]
pub struct Custom1d {
    pub lo: f64,
    pub hi: f64,
    log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    norm: f64,
    spline: InverseCdf,
}

impl std::fmt::Debug for Custom1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Custom1d").field("lo", &self.lo).field("hi", &self.hi).finish()
    }
}

impl Custom1d {
    pub fn new(lo: f64, hi: f64, log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(KlsError::InvalidParameter(format!("support [{lo}, {hi}]")));
        }
        let knots: Vec<f64> = (0..SPLINE_KNOTS).map(|k| lo + (hi - lo) * k as f64 / (SPLINE_KNOTS - 1) as f64).collect();
        let dens: Vec<f64> = knots.iter().map(|&t| log_density(t).exp()).collect();
        let mut cdf = vec![0.0; SPLINE_KNOTS];
        for k in 1..SPLINE_KNOTS {
            let piece = adaptive_gk15(|t| log_density(t).exp(), knots[k - 1], knots[k], 1e-300, 1e-12)?;
            cdf[k] = cdf[k - 1] + piece.value;
        }
        let norm = cdf[SPLINE_KNOTS - 1];
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(KlsError::InvalidMeasure("density does not integrate to a positive finite mass".into()));
        }
        let cdf = cdf.iter().map(|c| c / norm).collect();
        let pdf = dens.iter().map(|d| d / norm).collect();
        Ok(Custom1d { lo, hi, log_density, norm, spline: InverseCdf::new(knots, cdf, pdf)? })
    }

    /// Log-density interpolated linearly through `(t, log f)` knots with
    /// increasing `t`.
    pub fn from_log_table(table: &[(f64, f64)]) -> Result<Self> {
        if table.len() < 2 || table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(KlsError::InvalidInput("density table needs >= 2 rows with increasing t".into()));
        }
        if table.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(KlsError::InvalidInput("density table entries must be finite".into()));
        }
        let rows: Vec<(f64, f64)> = table.to_vec();
        let (lo, hi) = (rows[0].0, rows[rows.len() - 1].0);
        Self::new(
            lo,
            hi,
            Arc::new(move |t| {
                let i = rows.partition_point(|r| r.0 <= t).clamp(1, rows.len() - 1);
                let (t0, v0) = rows[i - 1];
                let (t1, v1) = rows[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }),
        )
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }

    /// Normalized log-density; `-inf` off the support.
    pub fn log_density(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            f64::NEG_INFINITY
        } else {
            (self.log_density)(t) - self.norm.ln()
        }
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(adaptive_gk15(|t| t * self.density(t), self.lo, self.hi, 1e-14, 1e-12)?.value)
    }

    /// Maximizer of the density by golden-section search, which is exact up
    /// to tolerance for a log-concave density.
    pub fn mode(&self) -> f64 {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (self.lo, self.hi);
        while b - a > 1e-12 * (1.0 + self.hi.abs().max(self.lo.abs())) {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if self.log_density(c) >= self.log_density(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let m = 0.5 * (a + b);
        // Endpoints can beat the interior when the density is monotone.
        [self.lo, m, self.hi].into_iter().max_by(|x, y| self.log_density(*x).total_cmp(&self.log_density(*y))).expect("three candidates")
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.spline.invert(rng.random())
    }
}

/// Product of `n` copies of a 1-D law.
pub trait Law1d: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64;
}

impl Law1d for MuP {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.sample_one(rng)
    }
}

impl Law1d for Custom1d {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.sample_one(rng)
    }
}

/// Draws `count` product points of one chunk.
pub fn for_each_product_point<L: Law1d + ?Sized>(law: &L, n: usize, rng: &mut ChaCha8Rng, count: usize, mut emit: impl FnMut(&[f64])) {
    let mut x = vec![0.0; n];
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = law.draw(rng);
        }
        emit(&x);
    }
}

/// `N` points of `mu_p^n`.
pub fn sample_mu_p(p: f64, n: usize, plan: &McPlan) -> Result<Vec<Vec<f64>>> {
    let law = MuP::new(p)?;
    let mut out = Vec::with_capacity(plan.samples);
    for c in 0..plan.chunks() {
        let count = CHUNK.min(plan.samples - c * CHUNK);
        let mut rng = chunk_rng(plan.seed, plan.stream, c as u64);
        for_each_product_point(&law, n, &mut rng, count, |x| out.push(x.to_vec()));
    }
    Ok(out)
}
