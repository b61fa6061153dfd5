//! Convex bodies containing the origin in their interior, described by their
//! Minkowski gauge `g(x) = inf { t > 0 : x in t K }`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, KlsError, Result};
use crate::linalg::{dot, norm, normalized, sym_eigen, tangent_basis};

mod affine;
mod faces;
mod geometry;

pub use affine::{isotropic_normalize, AffineMap};
pub use faces::{Facet, FacePatch};

/// Relative margin by which the active facet of a polytope gauge must win.
pub const FACET_MARGIN: f64 = 1e-9;
/// Curvature of `l_p` balls is only evaluated where `min |x_i| >= LP_AXIS_MARGIN |x|`.
pub const LP_AXIS_MARGIN: f64 = 1e-6;
/// Relative step of the central differences used for generic bodies.
pub const FD_STEP: f64 = 1e-5;

pub type GaugeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A body known only through its gauge.
#[derive(Clone)]
pub struct GenericGauge {
    pub name: String,
    pub gauge: GaugeFn,
    /// Any `R` with `K ⊂ R B_2^n`; used for bounding boxes and chords.
    pub outer_radius: f64,
    pub strictly_convex: bool,
}

impl fmt::Debug for GenericGauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericGauge")
            .field("name", &self.name)
            .field("outer_radius", &self.outer_radius)
            .field("strictly_convex", &self.strictly_convex)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum BodyKind {
    Ball { radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
    /// `[-a, a]^n`.
    Cube { half_side: f64 },
    /// `scale * B_p^n`.
    LpBall { p: f64, scale: f64 },
    /// The simplex `{y >= 0, sum y <= s}` translated so its barycenter is the origin.
    Simplex { scale: f64 },
    GenericSmooth(GenericGauge),
}

#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    kind: BodyKind,
}

/// A boundary point with its outer normal and curvatures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    /// Trace of the second fundamental form.
    pub mean_curvature: f64,
    pub min_principal_curvature: f64,
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(KlsError::InvalidParameter(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(KlsError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl ConvexBody {
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        check_dim(n)?;
        check_positive("radius", radius)?;
        Ok(ConvexBody { dim: n, kind: BodyKind::Ball { radius } })
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Self> {
        check_dim(semi_axes.len())?;
        for &a in semi_axes {
            check_positive("semi-axis", a)?;
        }
        Ok(ConvexBody { dim: semi_axes.len(), kind: BodyKind::Ellipsoid { semi_axes: semi_axes.to_vec() } })
    }

    pub fn cube(n: usize, half_side: f64) -> Result<Self> {
        check_dim(n)?;
        check_positive("half-side", half_side)?;
        Ok(ConvexBody { dim: n, kind: BodyKind::Cube { half_side } })
    }

    pub fn lp_ball(n: usize, p: f64, scale: f64) -> Result<Self> {
        check_dim(n)?;
        check_positive("scale", scale)?;
        if !(p >= 1.0) || !p.is_finite() {
            return Err(KlsError::InvalidParameter(format!("l_p ball needs 1 <= p < inf, got {p}")));
        }
        Ok(ConvexBody { dim: n, kind: BodyKind::LpBall { p, scale } })
    }

    pub fn simplex(n: usize, scale: f64) -> Result<Self> {
        check_dim(n)?;
        check_positive("scale", scale)?;
        Ok(ConvexBody { dim: n, kind: BodyKind::Simplex { scale } })
    }

    /// A body given by a gauge closure. The gauge must be convex, positively
    /// 1-homogeneous and smooth away from the origin.
    pub fn generic(n: usize, generic: GenericGauge) -> Result<Self> {
        check_dim(n)?;
        check_positive("outer radius", generic.outer_radius)?;
        let body = ConvexBody { dim: n, kind: BodyKind::GenericSmooth(generic) };
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let g = body.gauge_unchecked(&e);
            if !(g > 0.0) || !g.is_finite() {
                return Err(KlsError::InvalidParameter(format!("generic gauge of e_{i} is {g}")));
            }
        }
        Ok(body)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Short label used in reports, e.g. `ball(R=1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            BodyKind::Ball { radius } => format!("ball(n={},R={radius})", self.dim),
            BodyKind::Ellipsoid { semi_axes } => {
                let axes: Vec<String> = semi_axes.iter().map(|a| a.to_string()).collect();
                format!("ellipsoid({})", axes.join(","))
            }
            BodyKind::Cube { half_side } => format!("cube(n={},a={half_side})", self.dim),
            BodyKind::LpBall { p, scale } => format!("lp_ball(n={},p={p},s={scale})", self.dim),
            BodyKind::Simplex { scale } => format!("simplex(n={},s={scale})", self.dim),
            BodyKind::GenericSmooth(g) => format!("generic(n={},{})", self.dim, g.name),
        }
    }

    /// `C^2` boundary.
    pub fn smooth_boundary(&self) -> bool {
        match &self.kind {
            BodyKind::Ball { .. } | BodyKind::Ellipsoid { .. } | BodyKind::GenericSmooth(_) => true,
            BodyKind::LpBall { p, .. } => *p >= 2.0,
            BodyKind::Cube { .. } | BodyKind::Simplex { .. } => false,
        }
    }

    /// Boundary curvature bounded away from zero and infinity.
    pub fn strictly_convex(&self) -> bool {
        match &self.kind {
            BodyKind::Ball { .. } | BodyKind::Ellipsoid { .. } => true,
            BodyKind::LpBall { p, .. } => *p == 2.0,
            BodyKind::GenericSmooth(g) => g.strictly_convex,
            BodyKind::Cube { .. } | BodyKind::Simplex { .. } => false,
        }
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self.kind, BodyKind::Cube { .. } | BodyKind::Simplex { .. })
            || matches!(self.kind, BodyKind::LpBall { p, .. } if p == 1.0)
    }

    /// Invariant under coordinate sign flips.
    pub fn is_unconditional(&self) -> bool {
        !matches!(self.kind, BodyKind::Simplex { .. } | BodyKind::GenericSmooth(_))
    }

    /// `t K`.
    pub fn dilate(&self, t: f64) -> Result<Self> {
        check_positive("dilation", t)?;
        let kind = match &self.kind {
            BodyKind::Ball { radius } => BodyKind::Ball { radius: radius * t },
            BodyKind::Ellipsoid { semi_axes } => BodyKind::Ellipsoid { semi_axes: semi_axes.iter().map(|a| a * t).collect() },
            BodyKind::Cube { half_side } => BodyKind::Cube { half_side: half_side * t },
            BodyKind::LpBall { p, scale } => BodyKind::LpBall { p: *p, scale: scale * t },
            BodyKind::Simplex { scale } => BodyKind::Simplex { scale: scale * t },
            BodyKind::GenericSmooth(g) => {
                let inner = g.gauge.clone();
                BodyKind::GenericSmooth(GenericGauge {
                    name: format!("{}*{t}", g.name),
                    gauge: Arc::new(move |x: &[f64]| inner(x) / t),
                    outer_radius: g.outer_radius * t,
                    strictly_convex: g.strictly_convex,
                })
            }
        };
        Ok(ConvexBody { dim: self.dim, kind })
    }

    /// The dilate of volume one.
    pub fn volume_normalized(&self) -> Result<Self> {
        let v = self.volume()?;
        self.dilate(v.powf(-1.0 / self.dim as f64))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(KlsError::InvalidInput(format!("expected {} coordinates, got {}", self.dim, x.len())));
        }
        ensure_finite(x)
    }

    /// Minkowski gauge.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.gauge_unchecked(x))
    }

    pub(crate) fn gauge_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::Ball { radius } => norm(x) / radius,
            BodyKind::Ellipsoid { semi_axes } => {
                let m = x.iter().zip(semi_axes).fold(0.0f64, |m, (v, a)| m.max((v / a).abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().zip(semi_axes).map(|(v, a)| (v / a / m).powi(2)).sum::<f64>().sqrt()
            }
            BodyKind::Cube { half_side } => x.iter().fold(0.0f64, |m, v| m.max(v.abs())) / half_side,
            BodyKind::LpBall { p, scale } => lp_norm(x, *p) / scale,
            BodyKind::Simplex { scale } => {
                let n = self.dim as f64;
                let neg = x.iter().fold(f64::NEG_INFINITY, |m, v| m.max(-v));
                let sum: f64 = x.iter().sum();
                neg.max(sum) * (n + 1.0) / scale
            }
            BodyKind::GenericSmooth(g) => (g.gauge)(x),
        }
    }

    /// Gradient of the gauge at `x != 0`.
    pub fn gauge_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let r = norm(x);
        if r == 0.0 {
            return Err(KlsError::NonSmoothPoint("the gauge is not differentiable at the origin".into()));
        }
        match &self.kind {
            BodyKind::Cube { half_side } => {
                let (k, second) = top_two(x.iter().map(|v| v.abs()));
                if second >= x[k].abs() * (1.0 - FACET_MARGIN) {
                    return Err(KlsError::NonSmoothPoint("cube edge: maximal coordinate is not unique".into()));
                }
                let mut g = vec![0.0; self.dim];
                g[k] = x[k].signum() / half_side;
                Ok(g)
            }
            BodyKind::Simplex { .. } => {
                let facets = self.facets().expect("simplex has facets");
                let values = facets.iter().map(|f| dot(&f.normal, x) / f.offset);
                let (k, second) = top_two(values);
                let best = dot(&facets[k].normal, x) / facets[k].offset;
                if second >= best - FACET_MARGIN * best.abs() {
                    return Err(KlsError::NonSmoothPoint("simplex face: active facet is not unique".into()));
                }
                Ok(facets[k].normal.iter().map(|v| v / facets[k].offset).collect())
            }
            BodyKind::LpBall { p, .. } if *p == 1.0 => {
                if x.iter().any(|v| v.abs() <= FACET_MARGIN * r) {
                    return Err(KlsError::NonSmoothPoint("cross-polytope face: zero coordinate".into()));
                }
                Ok(self.gauge_gradient_ae(x))
            }
            BodyKind::GenericSmooth(g) => Ok(fd_gradient(&*g.gauge, x)),
            _ => Ok(self.gauge_gradient_ae(x)),
        }
    }

    /// Gauge gradient defined almost everywhere; at kinks it returns the
    /// gradient of the first active piece instead of failing.
    pub fn gauge_gradient_ae(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        match &self.kind {
            BodyKind::Ball { radius } => {
                let r = norm(x);
                x.iter().map(|v| v / (r * radius)).collect()
            }
            BodyKind::Ellipsoid { semi_axes } => {
                let g = self.gauge_unchecked(x);
                x.iter().zip(semi_axes).map(|(v, a)| v / (a * a * g)).collect()
            }
            BodyKind::Cube { half_side } => {
                let (k, _) = top_two(x.iter().map(|v| v.abs()));
                let mut g = vec![0.0; n];
                g[k] = sign(x[k]) / half_side;
                g
            }
            BodyKind::LpBall { p, scale } => {
                let p = *p;
                if p == 1.0 {
                    return x.iter().map(|v| sign(*v) / scale).collect();
                }
                let big = lp_norm(x, p);
                x.iter().map(|v| sign(*v) * (v.abs() / big).powf(p - 1.0) / scale).collect()
            }
            BodyKind::Simplex { .. } => {
                let facets = self.facets().expect("simplex has facets");
                let (k, _) = top_two(facets.iter().map(|f| dot(&f.normal, x) / f.offset));
                facets[k].normal.iter().map(|v| v / facets[k].offset).collect()
            }
            BodyKind::GenericSmooth(g) => fd_gradient(&*g.gauge, x),
        }
    }

    /// Hessian of the gauge at `x`, where the boundary is twice differentiable.
    pub fn gauge_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.dim;
        let r = norm(x);
        if r == 0.0 {
            return Err(KlsError::NonSmoothPoint("the gauge is not differentiable at the origin".into()));
        }
        match &self.kind {
            BodyKind::Ball { radius } => {
                let mut h = DMatrix::identity(n, n) / r;
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] -= x[i] * x[j] / (r * r * r);
                    }
                }
                Ok(h / *radius)
            }
            BodyKind::Ellipsoid { semi_axes } => {
                let g = self.gauge_unchecked(x);
                let dx: Vec<f64> = x.iter().zip(semi_axes).map(|(v, a)| v / (a * a)).collect();
                let mut h = DMatrix::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = 1.0 / (semi_axes[i] * semi_axes[i] * g);
                    for j in 0..n {
                        h[(i, j)] -= dx[i] * dx[j] / (g * g * g);
                    }
                }
                Ok(h)
            }
            BodyKind::LpBall { p, scale } => {
                let p = *p;
                if p == 1.0 {
                    return Err(KlsError::UnsupportedCurvature("cross-polytope has flat faces".into()));
                }
                if x.iter().any(|v| v.abs() < LP_AXIS_MARGIN * r) {
                    return Err(KlsError::NonSmoothPoint(format!(
                        "l_p curvature needs min |x_i| >= {LP_AXIS_MARGIN:e} |x|"
                    )));
                }
                let big = lp_norm(x, p);
                // Work with y = x / |x|_p to stay scale-free.
                let y: Vec<f64> = x.iter().map(|v| v / big).collect();
                let u: Vec<f64> = y.iter().map(|v| sign(*v) * v.abs().powf(p - 1.0)).collect();
                let mut h = DMatrix::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = y[i].abs().powf(p - 2.0);
                    for j in 0..n {
                        h[(i, j)] -= u[i] * u[j];
                    }
                }
                Ok(h * ((p - 1.0) / (scale * big)))
            }
            BodyKind::Cube { .. } | BodyKind::Simplex { .. } => {
                Err(KlsError::UnsupportedCurvature(format!("{} has flat faces", self.label())))
            }
            BodyKind::GenericSmooth(g) => Ok(fd_hessian(&*g.gauge, x)),
        }
    }

    /// Support function `h_K(theta) = sup_{x in K} <x, theta>`.
    pub fn support(&self, theta: &[f64]) -> Result<f64> {
        self.check_point(theta)?;
        match &self.kind {
            BodyKind::Ball { radius } => Ok(radius * norm(theta)),
            BodyKind::Ellipsoid { semi_axes } => {
                let s: Vec<f64> = theta.iter().zip(semi_axes).map(|(t, a)| t * a).collect();
                Ok(norm(&s))
            }
            BodyKind::Cube { half_side } => Ok(half_side * theta.iter().map(|t| t.abs()).sum::<f64>()),
            BodyKind::LpBall { p, scale } => {
                let q = if *p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
                Ok(scale * lp_norm(theta, q))
            }
            BodyKind::Simplex { .. } => Ok(self
                .vertices()
                .expect("simplex vertices")
                .iter()
                .map(|v| dot(v, theta))
                .fold(f64::NEG_INFINITY, f64::max)),
            BodyKind::GenericSmooth(_) => {
                Err(KlsError::Unsupported("support function of a gauge-only body".into()))
            }
        }
    }

    /// Boundary point `u / g(u)` and outer unit normal there.
    pub fn boundary_normal(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(u)?;
        let g = self.gauge_unchecked(u);
        if !(g > 0.0) {
            return Err(KlsError::InvalidInput("direction must be nonzero".into()));
        }
        let y: Vec<f64> = u.iter().map(|v| v / g).collect();
        let grad = self.gauge_gradient(&y)?;
        Ok((y, normalized(&grad)))
    }

    /// Tangent basis at the boundary point `y` and the second fundamental
    /// form in that basis.
    pub fn shape_operator(&self, y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let grad = self.gauge_gradient(y)?;
        let hess = self.gauge_hessian(y)?;
        let gn = norm(&grad);
        let nu: Vec<f64> = grad.iter().map(|v| v / gn).collect();
        let b = tangent_basis(&nu);
        let ii = b.transpose() * hess * &b / gn;
        let ii = (&ii + ii.transpose()) * 0.5;
        Ok((b, ii))
    }

    /// Principal curvatures (ascending) at the boundary point `y`.
    pub fn principal_curvatures(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (_, ii) = self.shape_operator(y)?;
        Ok(sym_eigen(ii).0)
    }

    /// Boundary point hit by the ray through `u`, with normal and curvatures.
    pub fn boundary_from_direction(&self, u: &[f64]) -> Result<BoundaryPoint> {
        let (point, normal) = self.boundary_normal(u)?;
        if self.is_polytope() {
            return Err(KlsError::UnsupportedCurvature(format!("{} has flat faces", self.label())));
        }
        let k = self.principal_curvatures(&point)?;
        Ok(BoundaryPoint {
            mean_curvature: k.iter().sum(),
            min_principal_curvature: k[0],
            point,
            normal,
        })
    }

    /// Parameters `t_- < 0 < t_+` with `x + t d` on the boundary, for `x`
    /// interior and `d != 0`.
    pub fn chord(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        match &self.kind {
            BodyKind::Ball { radius } => quadratic_chord(dot(d, d), dot(x, d), dot(x, x) - radius * radius),
            BodyKind::Ellipsoid { semi_axes } => {
                let (mut a, mut b, mut c) = (0.0, 0.0, -1.0);
                for i in 0..self.dim {
                    let w = 1.0 / (semi_axes[i] * semi_axes[i]);
                    a += w * d[i] * d[i];
                    b += w * x[i] * d[i];
                    c += w * x[i] * x[i];
                }
                quadratic_chord(a, b, c)
            }
            BodyKind::Cube { half_side } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..self.dim {
                    if d[i] != 0.0 {
                        let t1 = (half_side - x[i]) / d[i];
                        let t2 = (-half_side - x[i]) / d[i];
                        hi = hi.min(t1.max(t2));
                        lo = lo.max(t1.min(t2));
                    }
                }
                (lo, hi)
            }
            BodyKind::Simplex { .. } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for f in self.facets().expect("simplex facets") {
                    let dn = dot(&f.normal, d);
                    let slack = f.offset - dot(&f.normal, x);
                    if dn > 0.0 {
                        hi = hi.min(slack / dn);
                    } else if dn < 0.0 {
                        lo = lo.max(slack / dn);
                    }
                }
                (lo, hi)
            }
            _ => {
                let reach = 2.0 * self.outer_radius() / norm(d) + 1e-300;
                let f = |t: f64| {
                    let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
                    self.gauge_unchecked(&y) - 1.0
                };
                let solve = |end: f64| -> f64 {
                    let (mut a, mut b) = (0.0, end);
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if f(m) <= 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                        if (b - a).abs() <= 1e-14 * reach {
                            break;
                        }
                    }
                    0.5 * (a + b)
                };
                (solve(-reach), solve(reach))
            }
        }
    }

    /// Radius of a Euclidean ball containing the body.
    pub fn outer_radius(&self) -> f64 {
        let n = self.dim as f64;
        match &self.kind {
            BodyKind::Ball { radius } => *radius,
            BodyKind::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(0.0, f64::max),
            BodyKind::Cube { half_side } => half_side * n.sqrt(),
            BodyKind::LpBall { p, scale } => scale * n.powf((0.5 - 1.0 / p).max(0.0)),
            BodyKind::Simplex { scale } => {
                // distance from the barycenter to a vertex
                let c = scale / (n + 1.0);
                ((scale - c).powi(2) + (n - 1.0) * c * c).sqrt()
            }
            BodyKind::GenericSmooth(g) => g.outer_radius,
        }
    }

    /// Axis-aligned bounding box `[lo_i, hi_i]`.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let n = self.dim;
        match &self.kind {
            BodyKind::Ball { radius } => vec![(-radius, *radius); n],
            BodyKind::Ellipsoid { semi_axes } => semi_axes.iter().map(|a| (-a, *a)).collect(),
            BodyKind::Cube { half_side } => vec![(-half_side, *half_side); n],
            BodyKind::LpBall { scale, .. } => vec![(-scale, *scale); n],
            BodyKind::Simplex { scale } => {
                let c = scale / (n as f64 + 1.0);
                vec![(-c, scale - c); n]
            }
            BodyKind::GenericSmooth(g) => vec![(-g.outer_radius, g.outer_radius); n],
        }
    }

    /// Vertices of the simplex.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            BodyKind::Simplex { scale } => {
                let n = self.dim;
                let c = scale / (n as f64 + 1.0);
                let mut v = vec![vec![-c; n]];
                for k in 0..n {
                    let mut w = vec![-c; n];
                    w[k] += scale;
                    v.push(w);
                }
                Some(v)
            }
            _ => None,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Index of the largest value and the runner-up value.
fn top_two<I: Iterator<Item = f64>>(values: I) -> (usize, f64) {
    let (mut best, mut bi, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best {
            second = best;
            best = v;
            bi = i;
        } else if v > second {
            second = v;
        }
    }
    (bi, second)
}

pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || p.is_infinite() {
        return m;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if p == 2.0 {
        return norm(x);
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn quadratic_chord(a: f64, b: f64, c: f64) -> (f64, f64) {
    // a t^2 + 2 b t + c = 0 with c < 0
    let disc = (b * b - a * c).max(0.0).sqrt();
    let q = if b >= 0.0 { -(b + disc) } else { -(b - disc) };
    let t1 = q / a;
    let t2 = c / q;
    (t1.min(t2), t1.max(t2))
}

pub(crate) fn fd_gradient(g: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64]) -> Vec<f64> {
    let h = FD_STEP * norm(x);
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = g(&y);
            y[i] = x[i] - h;
            let fm = g(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn fd_hessian(g: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h = FD_STEP * norm(x);
    let mut m = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    let f0 = g(x);
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = g(&y);
        y[i] = x[i] - h;
        let fm = g(&y);
        y[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = g(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// JSON/TOML description `{kind, dim, params}` of a built-in body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyDescriptor {
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub params: BodyParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl BodyDescriptor {
    pub fn build(&self) -> Result<ConvexBody> {
        let p = &self.params;
        let n = self.dim;
        let unexpected = |allowed: &[&str]| -> Result<()> {
            let present = [
                ("radius", p.radius.is_some()),
                ("semi_axes", p.semi_axes.is_some()),
                ("half_side", p.half_side.is_some()),
                ("p", p.p.is_some()),
                ("scale", p.scale.is_some()),
            ];
            for (name, set) in present {
                if set && !allowed.contains(&name) {
                    return Err(KlsError::Config(format!("parameter `{name}` does not apply to kind `{}`", self.kind)));
                }
            }
            Ok(())
        };
        match self.kind.as_str() {
            "ball" => {
                unexpected(&["radius"])?;
                ConvexBody::ball(n, p.radius.unwrap_or(1.0))
            }
            "ellipsoid" => {
                unexpected(&["semi_axes"])?;
                let axes = p
                    .semi_axes
                    .clone()
                    .ok_or_else(|| KlsError::Config("ellipsoid needs params.semi_axes".into()))?;
                if axes.len() != n {
                    return Err(KlsError::Config(format!("ellipsoid has {} semi-axes but dim {n}", axes.len())));
                }
                ConvexBody::ellipsoid(&axes)
            }
            "cube" => {
                unexpected(&["half_side"])?;
                ConvexBody::cube(n, p.half_side.unwrap_or(1.0))
            }
            "lp_ball" => {
                unexpected(&["p", "scale"])?;
                let pp = p.p.ok_or_else(|| KlsError::Config("lp_ball needs params.p".into()))?;
                ConvexBody::lp_ball(n, pp, p.scale.unwrap_or(1.0))
            }
            "simplex" => {
                unexpected(&["scale"])?;
                ConvexBody::simplex(n, p.scale.unwrap_or(1.0))
            }
            "generic_smooth" => Err(KlsError::Config("generic_smooth bodies cannot be built from a descriptor".into())),
            other => Err(KlsError::Config(format!(
                "unknown body kind `{other}` (expected ball, ellipsoid, cube, lp_ball, simplex)"
            ))),
        }
    }
}

impl ConvexBody {
    pub fn descriptor(&self) -> BodyDescriptor {
        let mut params = BodyParams::default();
        let kind = match &self.kind {
            BodyKind::Ball { radius } => {
                params.radius = Some(*radius);
                "ball"
            }
            BodyKind::Ellipsoid { semi_axes } => {
                params.semi_axes = Some(semi_axes.clone());
                "ellipsoid"
            }
            BodyKind::Cube { half_side } => {
                params.half_side = Some(*half_side);
                "cube"
            }
            BodyKind::LpBall { p, scale } => {
                params.p = Some(*p);
                params.scale = Some(*scale);
                "lp_ball"
            }
            BodyKind::Simplex { scale } => {
                params.scale = Some(*scale);
                "simplex"
            }
            BodyKind::GenericSmooth(_) => "generic_smooth",
        };
        BodyDescriptor { kind: kind.to_string(), dim: self.dim, params }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: BodyDescriptor = serde_json::from_str(s)?;
        d.build()
    }
}

#[cfg(test)]
mod tests;
