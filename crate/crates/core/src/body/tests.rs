use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::special::{gamma, unit_ball_volume};

fn corpus(n: usize) -> Vec<ConvexBody> {
    let axes: Vec<f64> = (0..n).map(|i| 2.0 - i as f64 / n as f64).collect();
    vec![
        ConvexBody::ball(n, 1.3).unwrap(),
        ConvexBody::ellipsoid(&axes).unwrap(),
        ConvexBody::cube(n, 0.7).unwrap(),
        ConvexBody::lp_ball(n, 1.5, 1.0).unwrap(),
        ConvexBody::lp_ball(n, 3.0, 2.0).unwrap(),
        ConvexBody::lp_ball(n, 1.0, 1.0).unwrap(),
        ConvexBody::simplex(n, 1.0).unwrap(),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn generic_ellipse(a: f64, b: f64) -> ConvexBody {
    ConvexBody::generic(
        2,
        GenericGauge {
            name: "ellipse".into(),
            gauge: Arc::new(move |x: &[f64]| ((x[0] / a).powi(2) + (x[1] / b).powi(2)).sqrt()),
            outer_radius: a.max(b),
            strictly_convex: true,
        },
    )
    .unwrap()
}

#[test]
fn gauge_examples() {
    let ball = ConvexBody::ball(2, 1.0).unwrap();
    assert_relative_eq!(ball.gauge(&[0.3, 0.4]).unwrap(), 0.5, epsilon = 1e-15);
    let cube = ConvexBody::cube(4, 1.0).unwrap();
    assert_eq!(cube.gauge(&[0.1, -0.9, 0.3, 0.2]).unwrap(), 0.9);
    let lp = ConvexBody::lp_ball(2, 3.0, 1.0).unwrap();
    assert_relative_eq!(lp.gauge(&[1.0, 1.0]).unwrap(), 2f64.cbrt(), epsilon = 1e-15);
    assert!(matches!(ball.gauge(&[f64::NAN, 0.0]), Err(KlsError::InvalidInput(_))));
}

#[test]
fn gradient_examples() {
    let ball = ConvexBody::ball(2, 1.0).unwrap();
    assert_eq!(ball.gauge_gradient(&[0.0, 2.0]).unwrap(), vec![0.0, 1.0]);
    let e = ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap();
    let x = [2.0 * 0.6, 0.8];
    let g = e.gauge_gradient(&x).unwrap();
    assert_relative_eq!(g[0], x[0] / 4.0, epsilon = 1e-15);
    assert_relative_eq!(g[1], x[1], epsilon = 1e-15);
    let cube = ConvexBody::cube(3, 1.0).unwrap();
    assert!(matches!(cube.gauge_gradient(&[0.5, 0.5, 0.1]), Err(KlsError::NonSmoothPoint(_))));
}

#[test]
fn lp_gradient_matches_finite_differences() {
    let body = ConvexBody::lp_ball(5, 4.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = random_point(&mut rng, 5);
        let g = body.gauge_gradient(&x).unwrap();
        let fd = fd_gradient(&|y: &[f64]| body.gauge_unchecked(y), &x);
        for i in 0..5 {
            assert!((g[i] - fd[i]).abs() <= 1e-6 * crate::linalg::norm(&g), "{g:?} vs {fd:?}");
        }
    }
}

#[test]
fn euler_identity_and_homogeneity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 7] {
        for body in corpus(n) {
            for _ in 0..100 {
                let x = random_point(&mut rng, n);
                let g = body.gauge(&x).unwrap();
                let t = rng.random_range(0.01..50.0);
                let xt: Vec<f64> = x.iter().map(|v| v * t).collect();
                assert_relative_eq!(body.gauge(&xt).unwrap(), t * g, max_relative = 1e-12);
                if let Ok(grad) = body.gauge_gradient(&x) {
                    assert_relative_eq!(crate::linalg::dot(&grad, &x), g, max_relative = 1e-10);
                }
            }
        }
    }
}

#[test]
fn support_duality_at_boundary_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 4] {
        let axes: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let bodies = [
            ConvexBody::ball(n, 2.0).unwrap(),
            ConvexBody::ellipsoid(&axes).unwrap(),
            ConvexBody::lp_ball(n, 1.5, 1.0).unwrap(),
            ConvexBody::lp_ball(n, 4.0, 0.5).unwrap(),
        ];
        for body in &bodies {
            for _ in 0..200 {
                let x = random_point(&mut rng, n);
                let (y, nu) = body.boundary_normal(&x).unwrap();
                let g = body.gauge(&x).unwrap();
                let lhs = crate::linalg::dot(&x, &nu);
                let rhs = g * body.support(&nu).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
                assert_relative_eq!(body.gauge(&y).unwrap(), 1.0, epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn curvature_of_spheres_and_ellipse() {
    let s = ConvexBody::ball(3, 2.0).unwrap();
    let bp = s.boundary_from_direction(&[0.3, -0.2, 0.9]).unwrap();
    assert_relative_eq!(bp.mean_curvature, 1.0, epsilon = 1e-12);
    assert_relative_eq!(bp.min_principal_curvature, 0.5, epsilon = 1e-12);

    let e = ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap();
    let bp = e.boundary_from_direction(&[1.0, 0.0]).unwrap();
    assert_relative_eq!(bp.mean_curvature, 2.0, epsilon = 1e-12);
    assert_relative_eq!(bp.min_principal_curvature, 2.0, epsilon = 1e-12);
    // parametric oracle at (2 cos t, sin t): a b / (a^2 sin^2 t + b^2 cos^2 t)^{3/2}
    for t in [0.3f64, 1.1, 2.5, 4.0] {
        let bp = e.boundary_from_direction(&[2.0 * t.cos(), t.sin()]).unwrap();
        let exact = 2.0 / (4.0 * t.sin().powi(2) + t.cos().powi(2)).powf(1.5);
        assert_relative_eq!(bp.mean_curvature, exact, max_relative = 1e-12);
    }
    let cube = ConvexBody::cube(3, 1.0).unwrap();
    assert!(matches!(cube.boundary_from_direction(&[1.0, 0.2, 0.1]), Err(KlsError::UnsupportedCurvature(_))));
}

/// Curvature along a tangent direction `t` from the change of the normal field.
fn fd_normal_curvature(body: &ConvexBody, y: &[f64], t: &[f64]) -> f64 {
    let h = 1e-5;
    let shift = |s: f64| -> Vec<f64> {
        let p: Vec<f64> = y.iter().zip(t).map(|(a, b)| a + s * b).collect();
        body.boundary_normal(&p).unwrap().1
    };
    let (np, nm) = (shift(h), shift(-h));
    // the projection of p to the boundary moves by O(h^2), which is negligible here
    np.iter().zip(&nm).zip(t).map(|((a, b), c)| (a - b) / (2.0 * h) * c).sum()
}

#[test]
fn curvature_matches_normal_field_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for body in [
        ConvexBody::ellipsoid(&[2.0, 1.0, 0.7]).unwrap(),
        ConvexBody::lp_ball(3, 4.0, 1.0).unwrap(),
        ConvexBody::lp_ball(4, 1.5, 1.0).unwrap(),
    ] {
        let n = body.dim();
        let mut checked = 0;
        while checked < 50 {
            let u = random_point(&mut rng, n);
            let Ok((b, ii)) = body.shape_operator(&body.boundary_normal(&u).unwrap().0) else { continue };
            if u.iter().any(|v| v.abs() < 0.05) {
                continue;
            }
            let y = body.boundary_normal(&u).unwrap().0;
            for c in 0..n - 1 {
                let t: Vec<f64> = b.column(c).iter().copied().collect();
                let fd = fd_normal_curvature(&body, &y, &t);
                assert!((fd - ii[(c, c)]).abs() <= 1e-4 * ii[(c, c)].abs().max(1e-3), "{fd} vs {}", ii[(c, c)]);
            }
            checked += 1;
        }
    }
}

#[test]
fn lp_curvature_admissibility() {
    let body = ConvexBody::lp_ball(3, 3.0, 1.0).unwrap();
    assert!(matches!(body.boundary_from_direction(&[1.0, 0.0, 0.5]), Err(KlsError::NonSmoothPoint(_))));
    assert!(body.boundary_from_direction(&[1.0, 0.3, 0.5]).is_ok());
}

#[test]
fn mean_curvature_dominates_min_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let body = ConvexBody::ellipsoid(&[3.0, 1.0, 2.0, 0.5]).unwrap();
    for _ in 0..200 {
        let u = random_point(&mut rng, 4);
        let bp = body.boundary_from_direction(&u).unwrap();
        assert!(bp.mean_curvature >= 3.0 * bp.min_principal_curvature - 1e-12);
        assert!(bp.min_principal_curvature > 0.0);
        assert!(crate::linalg::dot(&bp.point, &bp.normal) > 0.0);
        assert_relative_eq!(crate::linalg::norm(&bp.normal), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn volumes_and_surfaces() {
    let b = ConvexBody::ball(2, 1.0).unwrap();
    assert_relative_eq!(b.volume().unwrap(), PI, epsilon = 1e-14);
    assert_relative_eq!(b.surface_area().unwrap(), 2.0 * PI, epsilon = 1e-14);
    for n in [2, 5, 9] {
        let c = ConvexBody::cube(n, 1.0).unwrap();
        assert_relative_eq!(c.volume().unwrap(), 2f64.powi(n as i32), max_relative = 1e-13);
        assert_relative_eq!(c.surface_area().unwrap(), 2.0 * n as f64 * 2f64.powi(n as i32 - 1), max_relative = 1e-13);
        for p in [1.0, 1.5, 3.0] {
            let lp = ConvexBody::lp_ball(n, p, 1.0).unwrap();
            let exact = 2f64.powi(n as i32) * gamma(1.0 + 1.0 / p).powi(n as i32) / gamma(1.0 + n as f64 / p);
            assert_relative_eq!(lp.volume().unwrap(), exact, max_relative = 1e-12);
        }
    }
    // the ellipse (2, 1) has perimeter 9.688448220547675...
    let e = ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap();
    assert_relative_eq!(e.surface_area().unwrap(), 9.688_448_220_547_675, max_relative = 1e-10);
    // the unit cross-polytope in R^3 has 8 equilateral faces of side sqrt 2
    let o = ConvexBody::lp_ball(3, 1.0, 1.0).unwrap();
    assert_relative_eq!(o.surface_area().unwrap(), 8.0 * 3f64.sqrt() / 4.0 * 2.0, max_relative = 1e-12);
    let s = ConvexBody::simplex(3, 1.0).unwrap();
    assert_relative_eq!(s.volume().unwrap(), 1.0 / 6.0, max_relative = 1e-13);
    assert_relative_eq!(s.surface_area().unwrap(), 1.5 + 3f64.sqrt() / 2.0, max_relative = 1e-13);
}

#[test]
fn quadrature_volumes_for_generic_and_lp_surfaces() {
    let g = generic_ellipse(2.0, 1.0);
    assert_relative_eq!(g.volume().unwrap(), 2.0 * PI, max_relative = 1e-10);
    assert_relative_eq!(g.surface_area().unwrap(), 9.688_448_220_547_675, max_relative = 1e-7);
    // l_p surfaces against the sphere-quadrature formula in the plane and in R^3
    for n in [2, 3] {
        for p in [1.5, 3.0, 4.0] {
            let lp = ConvexBody::lp_ball(n, p, 1.0).unwrap();
            let grid = crate::sphere::SphereGrid::new(n, 64).unwrap();
            let quad = grid.integrate(|u| {
                crate::linalg::norm(&lp.gauge_gradient_ae(u)) * lp.gauge(u).unwrap().powi(-(n as i32))
            });
            assert_relative_eq!(lp.surface_area().unwrap(), quad, max_relative = 1e-8);
        }
    }
    assert!(matches!(
        ConvexBody::generic(
            4,
            GenericGauge { name: "b".into(), gauge: Arc::new(|x: &[f64]| crate::linalg::norm(x)), outer_radius: 1.0, strictly_convex: true }
        )
        .unwrap()
        .volume(),
        Err(KlsError::Unsupported(_))
    ));
}

#[test]
fn lp_volume_matches_rejection() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (n, p) in [(3, 1.5), (6, 3.0), (4, 1.0)] {
        let lp = ConvexBody::lp_ball(n, p, 1.0).unwrap();
        let m = 400_000;
        let hits = (0..m).filter(|_| lp.gauge(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap() <= 1.0).count();
        let frac = hits as f64 / m as f64;
        let est = frac * 2f64.powi(n as i32);
        let se = (frac * (1.0 - frac) / m as f64).sqrt() * 2f64.powi(n as i32);
        assert!((est - lp.volume().unwrap()).abs() < 4.0 * se, "n={n} p={p}: {est} vs {}", lp.volume().unwrap());
    }
}

#[test]
fn isoperimetry_and_dilation_invariance() {
    for n in [2, 3, 10] {
        let b = ConvexBody::ball(n, 3.0).unwrap();
        assert_relative_eq!(b.isoperimetric_ratio().unwrap(), 1.0, epsilon = 1e-12);
        for body in corpus(n) {
            let i = body.isoperimetric_ratio().unwrap();
            assert!(i >= 1.0 - 1e-12, "{}: {i}", body.label());
            let i2 = body.dilate(2.7).unwrap().isoperimetric_ratio().unwrap();
            assert_relative_eq!(i, i2, max_relative = 1e-12);
        }
    }
    let c = ConvexBody::cube(16, 0.5).unwrap();
    assert_relative_eq!(c.isoperimetric_ratio().unwrap(), 2.0 / unit_ball_volume(16).powf(1.0 / 16.0), max_relative = 1e-12);
}

#[test]
fn chords_land_on_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [2, 5] {
        for body in corpus(n) {
            for _ in 0..50 {
                let r = 0.5 * body.in_radius().unwrap() / (n as f64).sqrt();
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-r..r)).collect();
                let d = random_point(&mut rng, n);
                let (lo, hi) = body.chord(&x, &d);
                assert!(lo < 0.0 && hi > 0.0);
                for t in [lo, hi] {
                    let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                    assert!((body.gauge(&y).unwrap() - 1.0).abs() < 1e-9, "{}", body.label());
                }
            }
        }
    }
}

#[test]
fn covariance_closed_forms() {
    // E x_1^2 over the unit l_p ball by 2-D sphere quadrature: int u_1^2 g^{-4} / 4 over |B_p|
    for p in [1.0, 1.5, 4.0] {
        let lp = ConvexBody::lp_ball(2, p, 1.0).unwrap();
        let grid = crate::sphere::SphereGrid::new(2, 64).unwrap();
        let m = grid.integrate(|u| u[0] * u[0] * lp.gauge(u).unwrap().powi(-4)) / 4.0 / lp.volume().unwrap();
        assert_relative_eq!(lp.covariance().unwrap()[(0, 0)], m, max_relative = 1e-10);
    }
    let s = ConvexBody::simplex(2, 1.0).unwrap();
    let c = s.covariance().unwrap();
    // triangle (0,0),(1,0),(0,1): Var x = 1/18, Cov = -1/36
    assert_relative_eq!(c[(0, 0)], 1.0 / 18.0, epsilon = 1e-15);
    assert_relative_eq!(c[(0, 1)], -1.0 / 36.0, epsilon = 1e-15);
}

#[test]
fn face_quadrature_areas() {
    for body in [ConvexBody::cube(2, 1.0).unwrap(), ConvexBody::cube(3, 0.5).unwrap(), ConvexBody::simplex(2, 1.0).unwrap(), ConvexBody::simplex(3, 2.0).unwrap()] {
        let q = body.face_quadrature(6).unwrap();
        let area: f64 = q.iter().map(|(_, w, _)| w).sum();
        assert_relative_eq!(area, body.surface_area().unwrap(), max_relative = 1e-13);
        let facets = body.facets().unwrap();
        for (x, _, k) in &q {
            assert!((crate::linalg::dot(x, &facets[*k].normal) - facets[*k].offset).abs() < 1e-13);
            assert!(body.gauge(x).unwrap() <= 1.0 + 1e-13);
        }
    }
}

#[test]
fn descriptors_round_trip_and_reject_unknown_fields() {
    for body in corpus(3) {
        let d = body.descriptor();
        let json = serde_json::to_string(&d).unwrap();
        let back = ConvexBody::from_json(&json).unwrap();
        assert_eq!(back.descriptor(), d);
    }
    assert!(ConvexBody::from_json(r#"{"kind":"ball","dim":2,"params":{"radius":1},"extra":1}"#).is_err());
    assert!(ConvexBody::from_json(r#"{"kind":"ball","dim":2,"params":{"half_side":1}}"#).is_err());
    assert!(ConvexBody::from_json(r#"{"kind":"torus","dim":2}"#).is_err());
    assert!(ConvexBody::from_json(r#"{"kind":"ellipsoid","dim":3,"params":{"semi_axes":[1,2]}}"#).is_err());
}

#[test]
fn isotropic_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud: Vec<Vec<f64>> = (0..20000).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let map = isotropic_normalize(&cloud).unwrap();
    for i in 0..3 {
        assert!((map.linear[(i, i)] - 3f64.sqrt()).abs() < 0.05);
    }
    let shifted: Vec<Vec<f64>> = cloud.iter().map(|p| vec![p[0] + 5.0, p[1] - 2.0, p[2]]).collect();
    let m2 = isotropic_normalize(&shifted).unwrap();
    let image: Vec<Vec<f64>> = shifted.iter().map(|p| m2.apply(p)).collect();
    let (mean, cov) = crate::linalg::mean_and_covariance(&image).unwrap();
    for i in 0..3 {
        assert!(mean[i].abs() < 1e-10);
        for j in 0..3 {
            assert!((cov[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
    // already isotropic: the map is the identity
    let iso = image.clone();
    let m3 = isotropic_normalize(&iso).unwrap();
    assert!((m3.linear.clone() - nalgebra::DMatrix::identity(3, 3)).abs().max() < 1e-10);
    let flat: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    assert!(matches!(isotropic_normalize(&flat), Err(KlsError::DegenerateCloud(_))));
}

#[test]
fn generic_body_uses_finite_differences() {
    let g = generic_ellipse(2.0, 1.0);
    let e = ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap();
    for t in [0.2f64, 1.3, 2.9] {
        let u = [t.cos(), t.sin()];
        let a = g.boundary_from_direction(&u).unwrap();
        let b = e.boundary_from_direction(&u).unwrap();
        assert_relative_eq!(a.mean_curvature, b.mean_curvature, max_relative = 1e-4);
        for i in 0..2 {
            assert!((a.normal[i] - b.normal[i]).abs() < 1e-8);
        }
    }
}

proptest! {
    #[test]
    fn gauge_is_subadditive(
        xs in proptest::collection::vec(-3.0f64..3.0, 4),
        ys in proptest::collection::vec(-3.0f64..3.0, 4),
    ) {
        for body in corpus(4) {
            let s: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a + b).collect();
            let lhs = body.gauge(&s).unwrap();
            let rhs = body.gauge(&xs).unwrap() + body.gauge(&ys).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn unit_vectors_have_finite_positive_gauge(v in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let r = crate::linalg::norm(&v);
        prop_assume!(r > 1e-6);
        let u: Vec<f64> = v.iter().map(|x| x / r).collect();
        for body in corpus(3) {
            let g = body.gauge(&u).unwrap();
            prop_assert!(g.is_finite() && g > 0.0);
        }
    }
}
