//! Smallest nonzero eigenvalue of the zero-flux 5-point Laplacian on a
//! rasterized planar body.
//!
//! Cells whose centers satisfy `g <= 1` are kept; faces between a kept cell
//! and a dropped one carry no flux. The eigenvalue comes from inverse
//! iteration with the constant mode deflated; each solve is conjugate
//! gradients preconditioned by an aggregation multigrid V-cycle whose coarse
//! operators are Galerkin products of the fine one.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::body::ConvexBody;
use crate::error::{KlsError, Result};

/// Coarsening stops at this many cells; the last level is solved densely.
const COARSEST: usize = 400;
/// Scaling of the coarse-grid correction, compensating the stiffness of
/// piecewise-constant aggregation.
const COARSE_SCALE: f64 = 1.6;

/// Weighted graph Laplacian in adjacency form.
#[derive(Debug, Clone)]
struct Level {
    /// `(neighbour, weight)` lists; the diagonal is the row sum.
    adj: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    /// Grid coordinates of each node at this level.
    coords: Vec<(usize, usize)>,
    /// Aggregate (coarse node) of each node, when a coarser level exists.
    parent: Vec<usize>,
}

impl Level {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.diag[i] * x[i];
            for &(j, w) in &self.adj[i] {
                s -= w * x[j];
            }
            y[i] = s;
        }
    }

    fn gauss_seidel(&self, x: &mut [f64], b: &[f64], forward: bool) {
        let n = self.len();
        let mut step = |i: usize| {
            let mut s = b[i];
            for &(j, w) in &self.adj[i] {
                s += w * x[j];
            }
            x[i] = s / self.diag[i];
        };
        if forward {
            (0..n).for_each(&mut step);
        } else {
            (0..n).rev().for_each(&mut step);
        }
    }
}

/// Rasterized domain with its multigrid hierarchy.
pub struct Raster {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    /// Cell centers of active cells.
    pub centers: Vec<(f64, f64)>,
    levels: Vec<Level>,
    coarse_pinv: DMatrix<f64>,
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Raster {
    pub fn new(body: &ConvexBody, h: f64) -> Result<Self> {
        if body.dim() != 2 {
            return Err(KlsError::InvalidInput("planar eigensolver needs a 2-D body".into()));
        }
        if !(h > 0.0) {
            return Err(KlsError::InvalidParameter(format!("grid spacing {h}")));
        }
        let bbox = body.bounding_box();
        // Center the grid on the bounding box so symmetric bodies stay symmetric.
        let nx = ((bbox[0].1 - bbox[0].0) / h).ceil() as usize + 2;
        let ny = ((bbox[1].1 - bbox[1].0) / h).ceil() as usize + 2;
        let ox = 0.5 * (bbox[0].0 + bbox[0].1) - 0.5 * nx as f64 * h;
        let oy = 0.5 * (bbox[1].0 + bbox[1].1) - 0.5 * ny as f64 * h;
        let mut index = vec![usize::MAX; nx * ny];
        let mut centers = Vec::new();
        let mut coords = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = (ox + (i as f64 + 0.5) * h, oy + (j as f64 + 0.5) * h);
                if body.gauge_unchecked(&[c.0, c.1]) <= 1.0 {
                    index[j * nx + i] = centers.len();
                    centers.push(c);
                    coords.push((i, j));
                }
            }
        }
        if centers.len() < 4 {
            return Err(KlsError::Resolution(format!("grid spacing {h} leaves {} cells", centers.len())));
        }
        let w = 1.0 / (h * h);
        let mut adj = vec![Vec::with_capacity(4); centers.len()];
        for (k, &(i, j)) in coords.iter().enumerate() {
            let mut link = |ii: usize, jj: usize| {
                let m = index[jj * nx + ii];
                if m != usize::MAX {
                    adj[k].push((m, w));
                }
            };
            if i > 0 {
                link(i - 1, j);
            }
            if i + 1 < nx {
                link(i + 1, j);
            }
            if j > 0 {
                link(i, j - 1);
            }
            if j + 1 < ny {
                link(i, j + 1);
            }
        }
        // Connectivity of the rasterization.
        let mut seen = vec![false; centers.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(k) = queue.pop_front() {
            for &(m, _) in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    reached += 1;
                    queue.push_back(m);
                }
            }
        }
        if reached != centers.len() {
            return Err(KlsError::Resolution(format!(
                "rasterization at h = {h} is disconnected ({reached} of {} cells reachable)",
                centers.len()
            )));
        }
        let diag = adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
        let mut levels = vec![Level { adj, diag, coords, parent: Vec::new() }];
        while levels.last().expect("non-empty").len() > COARSEST {
            let fine = levels.last_mut().expect("non-empty");
            let coarse = coarsen(fine);
            levels.push(coarse);
        }
        let coarse = levels.last().expect("non-empty");
        let m = coarse.len();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = coarse.diag[i];
            for &(j, w) in &coarse.adj[i] {
                a[(i, j)] -= w;
            }
        }
        let eig = a.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut pinv = DMatrix::zeros(m, m);
        for k in 0..m {
            let l = eig.eigenvalues[k];
            if l > 1e-10 * top {
                let v = eig.eigenvectors.column(k);
                pinv += v * v.transpose() / l;
            }
        }
        Ok(Raster { h, nx, ny, origin: (ox, oy), centers, levels, coarse_pinv: pinv })
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn area(&self) -> f64 {
        self.cells() as f64 * self.h * self.h
    }

    fn vcycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let lv = &self.levels[level];
        if level + 1 == self.levels.len() {
            let bv = nalgebra::DVector::from_column_slice(b);
            let sol = &self.coarse_pinv * bv;
            x.copy_from_slice(sol.as_slice());
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        lv.gauss_seidel(x, b, true);
        let mut r = vec![0.0; lv.len()];
        lv.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let nc = self.levels[level + 1].len();
        let mut rc = vec![0.0; nc];
        for (i, &p) in lv.parent.iter().enumerate() {
            rc[p] += r[i];
        }
        let mut ec = vec![0.0; nc];
        self.vcycle(level + 1, &rc, &mut ec);
        for (i, &p) in lv.parent.iter().enumerate() {
            x[i] += COARSE_SCALE * ec[p];
        }
        lv.gauss_seidel(x, b, false);
    }

    /// Solves `L x = b` for `b` of zero mean; `x` holds the initial guess.
    fn solve(&self, b: &[f64], x: &mut [f64], rtol: f64) -> Result<usize> {
        let lv = &self.levels[0];
        let n = lv.len();
        let mut r = vec![0.0; n];
        lv.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        remove_mean(&mut r);
        let bnorm = dot(b, b).sqrt();
        let mut z = vec![0.0; n];
        self.vcycle(0, &r, &mut z);
        remove_mean(&mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 0..500 {
            if dot(&r, &r).sqrt() <= rtol * bnorm {
                return Ok(it);
            }
            lv.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            remove_mean(&mut r);
            self.vcycle(0, &r, &mut z);
            remove_mean(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(KlsError::Resolution("preconditioned CG did not converge".into()))
    }

    /// Smallest nonzero eigenvalue and its eigenvector (unit norm, zero mean).
    pub fn first_eigenpair(&self, tol: f64) -> Result<(f64, Vec<f64>)> {
        let n = self.cells();
        // Start from a smooth, non-symmetric mixture of linear modes.
        let (cx, cy) = self.centers.iter().fold((0.0, 0.0), |a, c| (a.0 + c.0, a.1 + c.1));
        let (cx, cy) = (cx / n as f64, cy / n as f64);
        let mut u: Vec<f64> = self.centers.iter().map(|c| (c.0 - cx) + 0.37 * (c.1 - cy)).collect();
        remove_mean(&mut u);
        let mut lambda = f64::NAN;
        let lv = &self.levels[0];
        let mut lu = vec![0.0; n];
        for _ in 0..200 {
            let norm = dot(&u, &u).sqrt();
            u.iter_mut().for_each(|v| *v /= norm);
            lv.apply(&u, &mut lu);
            let rq = dot(&u, &lu);
            let resid = lu.iter().zip(&u).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
            if (rq - lambda).abs() <= tol * rq && resid <= 1e3 * tol.sqrt() * rq {
                return Ok((rq, u));
            }
            lambda = rq;
            let mut next: Vec<f64> = u.iter().map(|v| v / rq).collect();
            self.solve(&u, &mut next, 1e-10)?;
            remove_mean(&mut next);
            u = next;
        }
        Err(KlsError::Resolution("inverse iteration did not converge".into()))
    }
}

/// Pairs cells into 2x2 blocks; coarse weights sum the fine links between
/// blocks, i.e. `P^T A P` for piecewise-constant `P`.
fn coarsen(fine: &mut Level) -> Level {
    let mut map = std::collections::HashMap::new();
    let mut coords = Vec::new();
    fine.parent = fine
        .coords
        .iter()
        .map(|&(i, j)| {
            let key = (i / 2, j / 2);
            *map.entry(key).or_insert_with(|| {
                coords.push(key);
                coords.len() - 1
            })
        })
        .collect();
    let nc = coords.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nc];
    for (i, edges) in fine.adj.iter().enumerate() {
        let pi = fine.parent[i];
        for &(j, w) in edges {
            let pj = fine.parent[j];
            if pi != pj {
                match adj[pi].iter_mut().find(|e| e.0 == pj) {
                    Some(e) => e.1 += w,
                    None => adj[pi].push((pj, w)),
                }
            }
        }
    }
    let diag = adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
    Level { adj, diag, coords, parent: Vec::new() }
}
