use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::special::bessel_j_prime_first_zero;

fn quad() -> Method {
    Method::quadrature(32)
}

fn mc(samples: usize) -> Method {
    Method::monte_carlo(samples, 7)
}

fn unit(theta: &[f64]) -> Vec<f64> {
    let s = norm(theta);
    theta.iter().map(|v| v / s).collect()
}

/// `1 - g(x)` for the gauge `g` of `body`.
fn one_minus_gauge(body: &ConvexBody) -> TestFunction {
    let (b1, b2) = (Arc::new(body.clone()), Arc::new(body.clone()));
    TestFunction::new(
        "one_minus_gauge",
        Family::BoundaryVanishingProduct,
        move |x| 1.0 - b1.gauge_unchecked(x),
        move |x, g| {
            let d = b2.gauge_gradient_ae(x);
            g.iter_mut().zip(&d).for_each(|(gi, di)| *gi = -di);
        },
    )
    .with_vanishing(Vanishing::Boundary(body.label()))
}

/// `1 - |x|^2 / ρ^2` on the ball of radius `ρ`.
fn paraboloid(n: usize, rho: f64) -> TestFunction {
    let body = ConvexBody::ball(n, rho).unwrap();
    TestFunction::new(
        "paraboloid",
        Family::BoundaryVanishingProduct,
        move |x| 1.0 - dot(x, x) / (rho * rho),
        move |x, g| g.iter_mut().zip(x).for_each(|(gi, xi)| *gi = -2.0 * xi / (rho * rho)),
    )
    .with_vanishing(Vanishing::Boundary(body.label()))
}

fn random_interior(body: &ConvexBody, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = body.dim();
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = body.gauge_unchecked(&u);
        if g > 1e-3 {
            let t: f64 = rng.random_range(0.05..0.95);
            return u.iter().map(|v| t * v / g).collect();
        }
    }
}

fn test_bodies() -> Vec<ConvexBody> {
    suite::corpus_bodies(3).unwrap()
}

#[test]
fn corpus_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for body in test_bodies() {
        let mut funcs = corpus(&body, 1).unwrap();
        if body.is_unconditional() {
            funcs.extend(orthant_corpus(&body, 20, 1).unwrap());
        }
        assert_eq!(funcs.len() % 20, 0);
        for f in &funcs {
            for _ in 0..5 {
                let x = random_interior(&body, &mut rng);
                let g = f.grad(&x);
                let h = 1e-5;
                let fd: Vec<f64> = (0..x.len())
                    .map(|i| {
                        let mut a = x.clone();
                        let mut b = x.clone();
                        a[i] += h;
                        b[i] -= h;
                        // the cube and simplex gauges have kinks; skip points next to them
                        (f.eval(&a) - f.eval(&b)) / (2.0 * h)
                    })
                    .collect();
                let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let kinked = !body.smooth_boundary() && f.family == Family::BoundaryVanishingProduct;
                if !kinked {
                    assert!(err <= 1e-6 * norm(&g).max(1.0), "{} on {}: {err:e}", f.name, body.label());
                }
            }
        }
    }
}

#[test]
fn lipschitz_bounds_dominate_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for body in test_bodies() {
        for f in corpus(&body, 2).unwrap() {
            let l = f.lipschitz_bound.unwrap();
            for _ in 0..20 {
                let x = random_interior(&body, &mut rng);
                assert!(norm(&f.grad(&x)) <= l * (1.0 + 1e-12), "{} on {}", f.name, body.label());
            }
        }
    }
}

#[test]
fn corpus_is_reproducible() {
    let body = ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap();
    let x = [0.3, -0.2, 0.1];
    let a: Vec<f64> = corpus(&body, 9).unwrap().iter().map(|f| f.eval(&x)).collect();
    let b: Vec<f64> = corpus(&body, 9).unwrap().iter().map(|f| f.eval(&x)).collect();
    let c: Vec<f64> = corpus(&body, 10).unwrap().iter().map(|f| f.eval(&x)).collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn vanishing_declarations_are_checked() {
    let body = ConvexBody::cube(3, 1.0).unwrap();
    let region = Region::whole(body.clone());
    for f in family_corpus(&body, Family::BoundaryVanishingProduct, 20, 0).unwrap() {
        f.check_vanishing(&region, 0).unwrap();
    }
    let fake = TestFunction::linear(vec![1.0, 0.0, 0.0], 0.0).with_vanishing(Vanishing::Boundary(body.label()));
    assert!(matches!(fake.check_vanishing(&region, 0), Err(KlsError::Precondition(_))));
    let other = ConvexBody::ball(3, 1.0).unwrap();
    let f = one_minus_gauge(&other);
    assert!(matches!(f.check_vanishing(&region, 0), Err(KlsError::Precondition(_))));
}

#[test]
fn hardy_boundary_linear_on_ball() {
    let n = 3;
    let body = ConvexBody::ball(n, 1.0).unwrap();
    let f = TestFunction::linear(unit(&[1.0, 2.0, -0.5]), 0.3);
    let nf = n as f64;
    let r = check_hardy_boundary(&body, &f, &quad()).unwrap();
    assert_relative_eq!(r.lhs.estimate, 1.0 / (nf + 2.0), epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["radial_energy"].estimate, 4.0 / (nf * nf * (nf + 2.0)), epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["cone_variance"].estimate, 2.0 / nf, epsilon = 1e-12);
    assert!(r.passed());
    let m = check_hardy_boundary(&body, &f, &mc(100_000)).unwrap();
    assert!(m.passed());
    for (k, v) in &m.rhs_terms {
        assert!((v.estimate - r.rhs_terms[k].estimate).abs() <= 4.0 * v.stderr, "{k}");
    }
    assert!((m.lhs.estimate - r.lhs.estimate).abs() <= 4.0 * m.lhs.stderr);
}

#[test]
fn constants_give_equality() {
    let c = TestFunction::constant(2.5);
    for body in test_bodies() {
        for method in [quad(), mc(8192)] {
            for r in [
                check_hardy_boundary(&body, &c, &method).unwrap(),
                check_faber_krahn_boundary(&body, &c, &method).unwrap(),
            ] {
                assert_eq!(r.slack.estimate, 0.0, "{:?} on {}", r.theorem_id, body.label());
                assert!(r.passed());
            }
        }
    }
}

#[test]
fn cube_gauge_bump_has_no_cone_variance() {
    let body = ConvexBody::cube(2, 1.0).unwrap();
    let f = one_minus_gauge(&body);
    let r = check_hardy_boundary(&body, &f, &quad()).unwrap();
    // g has density 2r: Var = 1/2 - 4/9; <x, ∇g> = g.
    assert_relative_eq!(r.lhs.estimate, 1.0 / 18.0, epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["radial_energy"].estimate, 0.5, epsilon = 1e-12);
    assert!(r.rhs_terms["cone_variance"].estimate.abs() < 1e-14);
    let m = check_hardy_boundary(&body, &f, &mc(50_000)).unwrap();
    assert!((m.lhs.estimate - 1.0 / 18.0).abs() <= 4.0 * m.lhs.stderr);
}

#[test]
fn faber_krahn_boundary_on_ball() {
    let n = 3;
    let body = ConvexBody::ball(n, 1.0).unwrap();
    let f = TestFunction::linear(unit(&[0.2, -1.0, 0.7]), 0.0);
    let r = check_faber_krahn_boundary(&body, &f, &quad()).unwrap();
    assert_relative_eq!(r.lhs.estimate, 0.2, epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["gradient_energy"].estimate, 4.0 / 9.0, epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["surface_variance"].estimate, 2.0 / 3.0, epsilon = 1e-12);
    // 1 - |x| vanishes on the sphere, so only the Rayleigh quotient remains.
    let bump = one_minus_gauge(&body);
    let r = check_faber_krahn_boundary(&body, &bump, &quad()).unwrap();
    assert_relative_eq!(r.lhs.estimate, 0.1 - 1.0 / 16.0, epsilon = 1e-10);
    assert_relative_eq!(r.rhs_terms["gradient_energy"].estimate, 4.0 / 9.0, epsilon = 1e-10);
    assert!(r.rhs_terms["surface_variance"].estimate.abs() < 1e-14);
    // Rayleigh quotient ∫f²/∫|∇f|² = 0.1 lies below the constant 4/9.
    assert!(0.1 <= 4.0 / 9.0);
}

#[test]
fn faber_krahn_boundary_uses_surface_law_on_polytopes() {
    let body = ConvexBody::simplex(3, 1.0).unwrap();
    for f in corpus(&body, 5).unwrap().iter().step_by(7) {
        let q = check_faber_krahn_boundary(&body, f, &quad()).unwrap();
        let m = check_faber_krahn_boundary(&body, f, &mc(50_000)).unwrap();
        assert!(q.passed() && m.passed());
        let s = m.rhs_terms["surface_variance"];
        assert!((s.estimate - q.rhs_terms["surface_variance"].estimate).abs() <= 4.0 * s.stderr + 1e-12, "{}", f.name);
    }
}

#[test]
fn classical_hardy_paraboloid() {
    let f = paraboloid(3, 1.0);
    let body = ConvexBody::ball(3, 1.0).unwrap();
    let r = check_classical_hardy(&body, &f, &quad()).unwrap();
    assert_relative_eq!(r.lhs.estimate, 8.0 / 35.0, epsilon = 1e-12);
    assert_relative_eq!(r.rhs_terms["weighted_energy"].estimate, 4.0 / 9.0 * 12.0 / 7.0, epsilon = 1e-12);
    assert_eq!(r.diagnostics["center"], 0.0);
    assert!(r.passed());
    let z = check_classical_hardy(&body, &TestFunction::zero(&body), &mc(4096)).unwrap();
    assert_eq!(z.slack.estimate, 0.0);
    assert!(z.passed());
    let lin = TestFunction::linear(vec![1.0, 0.0, 0.0], 0.0);
    assert!(matches!(check_classical_hardy(&body, &lin, &quad()), Err(KlsError::Precondition(_))));
}

#[test]
fn classical_hardy_product_on_square() {
    let body = ConvexBody::cube(2, 1.0).unwrap();
    let funcs = family_corpus(&body, Family::BoundaryVanishingProduct, 4, 11).unwrap();
    let q = check_classical_hardy_many(&body, &funcs, &quad()).unwrap();
    let m = check_classical_hardy_many(&body, &funcs, &mc(100_000)).unwrap();
    for (a, b) in q.iter().zip(&m) {
        assert!(a.passed() && b.passed());
        assert!((a.lhs.estimate - b.lhs.estimate).abs() <= 4.0 * b.lhs.stderr);
    }
}

#[test]
fn faber_krahn_classical_is_sharp_on_the_ball() {
    // The first Dirichlet mode of the disk attains the constant.
    let body = ConvexBody::ball(2, 1.0).unwrap();
    let j = bessel_j_first_zero(0.0).unwrap();
    let mode = TestFunction::new(
        "j0",
        Family::RadialBump,
        move |x| crate::special::bessel_j(0.0, j * norm(x)),
        move |x, g| {
            let r = norm(x);
            let d = if r > 0.0 { -j * crate::special::bessel_j(1.0, j * r) / r } else { 0.0 };
            g.iter_mut().zip(x).for_each(|(gi, xi)| *gi = d * xi);
        },
    )
    .with_vanishing(Vanishing::Boundary(body.label()));
    let r = check_faber_krahn(&body, &mode, &Method::quadrature(32)).unwrap();
    assert!(r.slack.estimate.abs() < 1e-7, "{}", r.slack.estimate);
    assert!(r.passed());
}

#[test]
fn mean_curvature_hardy_constant_on_ball() {
    let body = ConvexBody::ball(3, 1.0).unwrap();
    let r = check_mean_curvature_hardy(&body, &TestFunction::constant(1.0), &quad()).unwrap();
    assert_relative_eq!(r.lhs.estimate, 3.0, epsilon = 1e-12);
    assert_eq!(r.rhs_terms["curvature_energy"].estimate, 0.0);
    assert_relative_eq!(r.rhs_terms["boundary_mass"].estimate, 6.0, epsilon = 1e-12);
    assert!(r.diagnostics["rejected_fraction"].abs() < 1e-12);
    let cube = ConvexBody::cube(3, 1.0).unwrap();
    assert!(matches!(
        check_mean_curvature_hardy(&cube, &TestFunction::constant(1.0), &quad()),
        Err(KlsError::UnsupportedCurvature(_))
    ));
}

#[test]
fn mean_curvature_agrees_with_shape_operator() {
    let body = ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bp = body.boundary_from_direction(&u).unwrap();
        assert_relative_eq!(mean_curvature(&body, &bp.point).unwrap(), bp.mean_curvature, epsilon = 1e-10);
    }
}

#[test]
fn mean_curvature_hardy_mc_matches_quadrature() {
    for body in [ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap(), ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap()] {
        let funcs: Vec<TestFunction> = corpus(&body, 3).unwrap().into_iter().step_by(11).collect();
        let q = check_mean_curvature_hardy_many(&body, &funcs, &quad()).unwrap();
        let m = check_mean_curvature_hardy_many(&body, &funcs, &mc(40_000)).unwrap();
        for (a, b) in q.iter().zip(&m) {
            assert!(a.passed() && b.passed(), "{}", a.function);
            assert!((a.lhs.estimate - b.lhs.estimate).abs() <= 4.5 * b.lhs.stderr, "{} {}", body.label(), a.function);
        }
    }
}

#[test]
fn curvature_identities_by_quadrature() {
    for body in [
        ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap(),
        ConvexBody::ball(3, 1.0).unwrap(),
        ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap(),
    ] {
        for c in mean_curvature_identities(&body, &Method::quadrature(48)).unwrap() {
            assert!(c.difference.estimate.abs() < 1e-8, "{} {}: {:e}", body.label(), c.name, c.difference.estimate);
            assert!(c.holds);
        }
    }
    let ball = ConvexBody::ball(3, 1.0).unwrap();
    let ids = mean_curvature_identities(&ball, &quad()).unwrap();
    assert_relative_eq!(ids[0].lhs.estimate, 3.0, epsilon = 1e-12);
}

#[test]
fn curvature_identities_by_monte_carlo() {
    for body in [ConvexBody::ball(64, 1.0).unwrap(), ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap()] {
        for c in mean_curvature_identities(&body, &mc(20_000)).unwrap() {
            assert!(c.holds, "{} {}: {:?}", body.label(), c.name, c.difference);
        }
    }
}

#[test]
fn orthant_hardy_examples() {
    let disk = ConvexBody::ball(2, 1.0).unwrap();
    let quarter = TestFunction::coordinate_product(&disk, vec![0.0, 0.0], true).unwrap();
    let q = check_unconditional_hardy(&disk, &quarter, &quad()).unwrap();
    // f = x1 x2 (1 - r²): ∫_Q f²/r² = (π/4)·(1/8)·(1/2)·∫ r³(1-r²)² ... normalized by |Q ∩ B| = π/4.
    // E[f²/r²] = E[cos²sin² r²(1-r²)²] = (1/8)·2∫ r³(1-r²)² dr = 1/96.
    assert_relative_eq!(q.lhs.estimate, 1.0 / 96.0, epsilon = 1e-12);
    assert!(q.passed());
    let m = check_unconditional_hardy(&disk, &quarter, &mc(50_000)).unwrap();
    assert!((m.lhs.estimate - q.lhs.estimate).abs() <= 4.0 * m.lhs.stderr);

    let cross = ConvexBody::lp_ball(3, 1.0, 1.0).unwrap();
    let prod = TestFunction::coordinate_product(&cross, vec![0.0; 3], false).unwrap();
    let q = check_unconditional_hardy(&cross, &prod, &quad()).unwrap();
    let m = check_unconditional_hardy(&cross, &prod, &mc(100_000)).unwrap();
    assert!(q.passed() && m.passed());
    // E|∇(x1x2x3)|² on the standard simplex: 3 E[x1²x2²] = 3 · 6 · 2!2!/7! = 72/5040 · 3.
    assert_relative_eq!(q.rhs_terms["gradient_energy"].estimate, 4.0 / 9.0 * 3.0 * 6.0 * 4.0 / 5040.0, epsilon = 1e-10);
    assert!((m.lhs.estimate - q.lhs.estimate).abs() <= 4.0 * m.lhs.stderr);

    let zero = TestFunction::constant(0.0).with_vanishing(Vanishing::CoordinateHyperplanes);
    let z = check_unconditional_hardy(&disk, &zero, &quad()).unwrap();
    assert_eq!(z.slack.estimate, 0.0);

    let simplex = ConvexBody::simplex(3, 1.0).unwrap();
    assert!(matches!(check_unconditional_hardy(&simplex, &prod, &quad()), Err(KlsError::Precondition(_))));
    let lin = TestFunction::linear(vec![1.0, 1.0], 0.0).with_vanishing(Vanishing::CoordinateHyperplanes);
    assert!(matches!(check_unconditional_hardy(&disk, &lin, &quad()), Err(KlsError::Precondition(_))));
}

#[test]
fn origin_hardy_on_ball() {
    let body = ConvexBody::ball(3, 1.0).unwrap();
    let f = paraboloid(3, 1.0);
    let r = check_origin_hardy_many(&body, std::slice::from_ref(&f), &quad()).unwrap().remove(0);
    // E[(1-r²)²/r²] = 3∫(1-r²)² dr = 3·8/15; E|∇f|² = 4·3/5.
    assert_relative_eq!(r.lhs.estimate, 8.0 / 5.0, epsilon = 1e-10);
    assert_relative_eq!(r.rhs_terms["gradient_energy"].estimate, 4.0 * 12.0 / 5.0, epsilon = 1e-10);
    let m = check_origin_hardy_many(&body, std::slice::from_ref(&f), &mc(20_000)).unwrap().remove(0);
    assert!((m.lhs.estimate - 1.6).abs() <= 4.0 * m.lhs.stderr + 1e-12);
    let disk = ConvexBody::ball(2, 1.0).unwrap();
    assert!(check_origin_hardy_many(&disk, &[paraboloid(2, 1.0)], &quad()).is_err());
}

#[test]
fn isoperimetry_examples() {
    for n in [2, 3, 7] {
        let r = check_isoperimetry(&ConvexBody::ball(n, 1.3).unwrap()).unwrap();
        assert_relative_eq!(r.diagnostics["isoperimetric_ratio"], 1.0, epsilon = 1e-12);
        assert!(r.passed());
        let cube = ConvexBody::cube(n, 0.5).unwrap();
        let r = check_isoperimetry(&cube).unwrap();
        let expect = 2.0 / unit_ball_volume(n).powf(1.0 / n as f64);
        assert_relative_eq!(r.diagnostics["isoperimetric_ratio"], expect, epsilon = 1e-12);
    }
    let e = check_isoperimetry(&ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap()).unwrap();
    assert!(e.diagnostics["isoperimetric_ratio"] > 1.0 && e.passed());
    // I ≍ √n for the cube
    let i = |n| check_isoperimetry(&ConvexBody::cube(n, 0.5).unwrap()).unwrap().diagnostics["isoperimetric_ratio"];
    let ratio: f64 = i(400) / (400f64).sqrt();
    assert!(ratio > 0.3 && ratio < 0.6, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn isoperimetric_ratio_is_dilation_invariant(t in 0.1f64..10.0, which in 0usize..5) {
        let body = [
            ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap(),
            ConvexBody::cube(4, 1.0).unwrap(),
            ConvexBody::lp_ball(3, 1.5, 1.0).unwrap(),
            ConvexBody::lp_ball(5, 3.0, 1.0).unwrap(),
            ConvexBody::simplex(3, 1.0).unwrap(),
        ][which].clone();
        let a = check_isoperimetry(&body).unwrap().diagnostics["isoperimetric_ratio"];
        let b = check_isoperimetry(&body.dilate(t).unwrap()).unwrap().diagnostics["isoperimetric_ratio"];
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn hardy_boundary_holds_for_random_linear(theta in prop::collection::vec(-1.0f64..1.0, 2), c in -1.0f64..1.0, a in 0.5f64..2.0) {
        prop_assume!(norm(&theta) > 1e-3);
        let body = ConvexBody::ellipsoid(&[a, 1.0]).unwrap();
        let f = TestFunction::linear(theta, c);
        prop_assert!(check_hardy_boundary(&body, &f, &quad()).unwrap().passed());
        prop_assert!(check_faber_krahn_boundary(&body, &f, &quad()).unwrap().passed());
    }
}

#[test]
fn colesanti_circle_and_ellipse() {
    let circle = ConvexBody::ball(2, 1.0).unwrap();
    let one = check_colesanti(&circle, &TestFunction::constant(1.0), 32).unwrap();
    assert!(one.lhs.estimate.abs() < 1e-12 && one.rhs().abs() < 1e-12);
    assert_relative_eq!(one.diagnostics["curvature_mass"], 2.0 * PI, epsilon = 1e-12);
    let cos = check_colesanti(&circle, &TestFunction::linear(vec![1.0, 0.0], 0.0), 32).unwrap();
    assert_relative_eq!(cos.lhs.estimate, PI, epsilon = 1e-12);
    assert_relative_eq!(cos.rhs(), PI, epsilon = 1e-12);
    assert!(cos.passed());
    let ellipse = ConvexBody::ellipsoid(&[2.0, 1.0]).unwrap();
    let sq = TestFunction::new("x1^2", Family::Quadratic, |x| x[0] * x[0], |x, g| {
        g[0] = 2.0 * x[0];
        g[1] = 0.0;
    });
    let r = check_colesanti(&ellipse, &sq, 48).unwrap();
    assert!(r.slack.estimate > 1e-3 && r.passed());
    for body in [ellipse, ConvexBody::ellipsoid(&[2.0, 1.0, 0.5]).unwrap()] {
        let n = body.dim();
        let mut theta = vec![0.3; n];
        theta[0] = -1.0;
        let r = check_colesanti(&body, &TestFunction::linear(theta, 0.0), 48).unwrap();
        assert!(r.passed(), "{}: {:e}", body.label(), r.slack.estimate);
    }
    let cube = ConvexBody::cube(2, 1.0).unwrap();
    assert!(matches!(check_colesanti(&cube, &TestFunction::constant(1.0), 16), Err(KlsError::UnsupportedCurvature(_))));
}

#[test]
fn corollaries_on_balls_and_cube() {
    let n = 10;
    let rho = ((n + 2) as f64).sqrt();
    let ball = ConvexBody::ball(n, rho).unwrap();
    let est = SpectralEstimates { p_neumann: Some(rho * rho / bessel_j_prime_first_zero(n as f64 / 2.0).unwrap().powi(2)), p_lin: Some(1.0), ..Default::default() };
    let rep = evaluate_corollaries(&ball, &est, &mc(4096)).unwrap();
    let nf = n as f64;
    let jensen = rep.jensen.as_ref().unwrap();
    assert!(jensen.passed());
    assert_relative_eq!(jensen.rhs(), nf / (nf - 1.0), epsilon = 1e-12);
    let q = rep.records.iter().find(|r| r.name == "main_bound_quantity").unwrap();
    let expect = nf.sqrt() * unit_ball_volume(n).powf(1.0 / nf) * rho * rho / (nf - 1.0);
    assert_relative_eq!(q.value.estimate, expect, epsilon = 1e-10);
    assert!(q.value.estimate < 10.0);
    assert!(rep.records.iter().all(|r| r.verdict == Verdict::RatioOnly));
    assert!(rep.omissions.iter().any(|o| o.starts_with("cone_poincare_rhs")));

    let cube = ConvexBody::cube(6, 0.5).unwrap();
    let rep = evaluate_corollaries(&cube, &SpectralEstimates::default(), &mc(4096)).unwrap();
    assert!(rep.jensen.is_none());
    assert!(rep.omissions.iter().any(|o| o.starts_with("curvature terms")));
    let i = rep.records.iter().find(|r| r.name == "isoperimetric_ratio").unwrap();
    assert_relative_eq!(i.value.estimate, 2.0 / unit_ball_volume(6).powf(1.0 / 6.0), epsilon = 1e-12);
}

#[test]
fn jensen_bound_on_ellipses() {
    for a in [1.0, 1.5, 3.0] {
        let body = ConvexBody::ellipsoid(&[a, 1.0]).unwrap();
        let rep = evaluate_corollaries(&body, &SpectralEstimates::default(), &Method::quadrature(48)).unwrap();
        let j = rep.jensen.unwrap();
        assert!(j.passed());
        if a > 1.0 {
            assert!(j.slack.estimate > 1e-3);
        }
    }
}

#[test]
fn boundary_linear_bounds_on_ball() {
    // y uniform on the sphere: Var <θ, y> = 1/n for both laws
    let body = ConvexBody::ball(3, 1.0).unwrap();
    let (cone, surf) = boundary_linear_bounds(&body, &quad()).unwrap();
    assert_relative_eq!(cone.estimate, 1.0 / 3.0, epsilon = 1e-10);
    assert_relative_eq!(surf.estimate, 1.0 / 3.0, epsilon = 1e-10);
}

#[test]
fn reports_serialize_to_flat_records() {
    let body = ConvexBody::ball(2, 1.0).unwrap();
    let r = check_hardy_boundary(&body, &TestFunction::linear(vec![1.0, 0.0], 0.0), &mc(4096)).unwrap();
    let v = r.to_record();
    assert_eq!(v["theorem_id"], "hardy_boundary");
    assert_eq!(v["N"], 4096);
    assert_eq!(v["verdict"], "pass");
    assert!(v["terms"]["cone_variance"]["stderr"].is_number());
    assert!(v["terms"]["lhs"]["estimate"].is_number());
}

#[test]
fn checkers_are_deterministic() {
    let body = ConvexBody::lp_ball(3, 1.5, 1.0).unwrap();
    let funcs = family_corpus(&body, Family::MaxAffine, 3, 0).unwrap();
    let a = check_hardy_boundary_many(&body, &funcs, &mc(10_000)).unwrap();
    let b = check_hardy_boundary_many(&body, &funcs, &mc(10_000)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.slack, y.slack);
    }
}
