//! Exact face decompositions of the cube and the simplex.

use rand::Rng;

use super::{BodyKind, ConvexBody};
use crate::error::{KlsError, Result};
use crate::quadrature::GaussLegendre;

/// Half-space `<normal, x> <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Geometry of one facet.
#[derive(Debug, Clone, PartialEq)]
pub enum FacePatch {
    /// `x_axis = value`, remaining coordinates in `[-half_side, half_side]`.
    Square { axis: usize, value: f64, half_side: f64 },
    /// Convex hull of `n` affinely independent points.
    Simplex { vertices: Vec<Vec<f64>> },
}

fn ln_factorial(k: usize) -> f64 {
    crate::special::ln_gamma(k as f64 + 1.0)
}

impl FacePatch {
    /// Uniform point on the facet.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            FacePatch::Square { axis, value, half_side } => (0..n)
                .map(|i| if i == *axis { *value } else { rng.random_range(-half_side..*half_side) })
                .collect(),
            FacePatch::Simplex { vertices } => {
                // Dirichlet(1,..,1) barycentric weights via normalized exponentials.
                let e: Vec<f64> = vertices.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                let mut x = vec![0.0; n];
                for (w, v) in e.iter().zip(vertices) {
                    for i in 0..n {
                        x[i] += w / s * v[i];
                    }
                }
                x
            }
        }
    }
}

/// Area of the `(n-1)`-simplex spanned by `n` points, via the Gram determinant.
fn simplex_area(vertices: &[Vec<f64>]) -> f64 {
    let k = vertices.len() - 1;
    let edges: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| crate::linalg::dot(&edges[i], &edges[j]));
    (gram.determinant().max(0.0).sqrt().ln() - ln_factorial(k)).exp()
}

impl ConvexBody {
    /// Facets of a polytope body, as half-spaces.
    pub fn facets(&self) -> Option<Vec<Facet>> {
        let n = self.dim;
        match &self.kind {
            BodyKind::Cube { half_side } => {
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    for s in [1.0, -1.0] {
                        let mut normal = vec![0.0; n];
                        normal[i] = s;
                        out.push(Facet { normal, offset: *half_side });
                    }
                }
                Some(out)
            }
            BodyKind::Simplex { scale } => {
                let c = scale / (n as f64 + 1.0);
                let mut out = Vec::with_capacity(n + 1);
                for i in 0..n {
                    let mut normal = vec![0.0; n];
                    normal[i] = -1.0;
                    out.push(Facet { normal, offset: c });
                }
                let r = (n as f64).sqrt();
                out.push(Facet { normal: vec![1.0 / r; n], offset: c / r });
                Some(out)
            }
            _ => None,
        }
    }

    /// Facets with their geometry and areas, in the order of [`Self::facets`].
    pub fn face_patches(&self) -> Result<Vec<(Facet, FacePatch, f64)>> {
        let n = self.dim;
        let facets = self
            .facets()
            .ok_or_else(|| KlsError::Unsupported(format!("{} has no face decomposition", self.label())))?;
        match &self.kind {
            BodyKind::Cube { half_side } => {
                let area = (n as f64 - 1.0) * (2.0 * half_side).ln();
                Ok(facets
                    .into_iter()
                    .map(|f| {
                        let axis = f.normal.iter().position(|v| *v != 0.0).expect("axis normal");
                        let value = f.normal[axis] * half_side;
                        (f, FacePatch::Square { axis, value, half_side: *half_side }, area.exp())
                    })
                    .collect())
            }
            BodyKind::Simplex { .. } => {
                let verts = self.vertices().expect("simplex vertices");
                Ok(facets
                    .into_iter()
                    .enumerate()
                    .map(|(i, f)| {
                        // facet i < n omits vertex e_i (index i + 1); the last omits the apex 0
                        let skip = if i < n { i + 1 } else { 0 };
                        let vertices: Vec<Vec<f64>> =
                            verts.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, v)| v.clone()).collect();
                        let area = simplex_area(&vertices);
                        (f, FacePatch::Simplex { vertices }, area)
                    })
                    .collect())
            }
            _ => unreachable!("facets() returned Some"),
        }
    }

    /// Tensor/Duffy quadrature on the faces for `n <= 3`: points, surface
    /// weights `dA`, and the index of the facet each point lies on.
    pub fn face_quadrature(&self, m: usize) -> Result<Vec<(Vec<f64>, f64, usize)>> {
        let n = self.dim;
        if n > 3 {
            return Err(KlsError::Unsupported(format!("face quadrature needs n <= 3 (got {n})")));
        }
        let gl = GaussLegendre::new(m);
        let unit: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
        let mut out = Vec::new();
        for (k, (_, patch, area)) in self.face_patches()?.into_iter().enumerate() {
            match &patch {
                FacePatch::Square { axis, value, half_side } => {
                    let free: Vec<usize> = (0..n).filter(|i| i != axis).collect();
                    let one_d: Vec<(f64, f64)> = gl.mapped(-half_side, *half_side).collect();
                    if free.len() == 1 {
                        for &(s, w) in &one_d {
                            let mut x = vec![0.0; n];
                            x[*axis] = *value;
                            x[free[0]] = s;
                            out.push((x, w, k));
                        }
                    } else {
                        for &(s, ws) in &one_d {
                            for &(t, wt) in &one_d {
                                let mut x = vec![0.0; n];
                                x[*axis] = *value;
                                x[free[0]] = s;
                                x[free[1]] = t;
                                out.push((x, ws * wt, k));
                            }
                        }
                    }
                }
                FacePatch::Simplex { vertices } => {
                    if vertices.len() == 2 {
                        for &(s, w) in &unit {
                            let x: Vec<f64> = (0..n).map(|i| (1.0 - s) * vertices[0][i] + s * vertices[1][i]).collect();
                            out.push((x, w * area, k));
                        }
                    } else {
                        // Duffy: barycentrics (1 - s, s (1 - t), s t), Jacobian 2 A s.
                        for &(s, ws) in &unit {
                            for &(t, wt) in &unit {
                                let b = [1.0 - s, s * (1.0 - t), s * t];
                                let x: Vec<f64> =
                                    (0..n).map(|i| (0..3).map(|j| b[j] * vertices[j][i]).sum()).collect();
                                out.push((x, ws * wt * 2.0 * area * s, k));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
