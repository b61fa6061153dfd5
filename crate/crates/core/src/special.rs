//! Gamma-family helpers and Bessel functions of the first kind.
//!
//! `J_nu(x)` uses the ascending series for small arguments, where the
//! alternating terms stay within a few orders of magnitude of the result,
//! and the Schläfli integral representation otherwise:
//!
//! ```text
//! J_nu(x) = 1/pi int_0^pi cos(nu t - x sin t) dt
//!         - sin(nu pi)/pi int_0^inf exp(-x sinh t - nu t) dt
//! ```
//!
//! which has no cancellation problem for large orders.

use std::f64::consts::PI;

use crate::error::{KlsError, Result};
use crate::quadrature::GaussLegendre;

pub use statrs::function::gamma::{gamma, gamma_lr, gamma_ur, ln_gamma};

/// Leading coefficient in the large-order expansion of the first Bessel zero,
/// `j_{nu,1} = nu + c0 nu^{1/3} + O(nu^{-1/3})`.
pub const BESSEL_ZERO_C0: f64 = 1.855_757_081_489_239;

const SERIES_CUTOFF: f64 = 8.0;

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

/// `ln |B_2^n|`, stable for large `n`.
pub fn ln_unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    h * PI.ln() - ln_gamma(h + 1.0)
}

/// `E|g|` for a standard Gaussian vector in `R^n`.
pub fn gaussian_norm_mean(n: usize) -> f64 {
    let n = n as f64;
    (0.5 * 2f64.ln() + ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}

/// Bessel function of the first kind `J_nu(x)` for real order `nu >= 0`
/// and `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x >= 0.0, "bessel_j needs nu >= 0, x >= 0");
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_CUTOFF {
        bessel_j_series(nu, x)
    } else {
        bessel_j_integral(nu, x)
    }
}

fn bessel_j_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 0..200 {
        let kf = k as f64;
        term *= -q / ((kf + 1.0) * (kf + 1.0 + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn bessel_j_integral(nu: f64, x: f64) -> f64 {
    let gl = GaussLegendre::new(20);
    // Oscillatory part: about (nu + x) / (2 pi) periods over [0, pi].
    let panels = ((nu + x) / 2.0).ceil() as usize + 8;
    let h = PI / panels as f64;
    let mut first = 0.0;
    for k in 0..panels {
        let a = k as f64 * h;
        first += gl.integrate(|t| (nu * t - x * t.sin()).cos(), a, a + h);
    }
    first /= PI;

    let s = (nu * PI).sin();
    if s.abs() < 1e-15 {
        return first;
    }
    // exp(-x sinh t - nu t) < 1e-18 beyond t_max.
    let mut t_max: f64 = 1.0;
    while x * t_max.sinh() + nu * t_max < 42.0 {
        t_max *= 1.5;
    }
    let panels = 24;
    let h = t_max / panels as f64;
    let mut second = 0.0;
    for k in 0..panels {
        let a = k as f64 * h;
        second += gl.integrate(|t| (-x * t.sinh() - nu * t).exp(), a, a + h);
    }
    first - s / PI * second
}

/// Derivative `J'_nu(x) = (nu / x) J_nu(x) - J_{nu+1}(x)`.
pub fn bessel_j_prime(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return match nu {
            v if v == 1.0 => 0.5,
            v if v == 0.0 || v > 1.0 => 0.0,
            _ => f64::INFINITY,
        };
    }
    nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x)
}

/// Bisection to an absolute width of `tol` on a sign-changing bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(KlsError::Domain(format!(
            "no sign change on [{lo}, {hi}]: f = {flo:.3e}, {fhi:.3e}"
        )));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First positive zero `j_{nu,1}` of `J_nu`.
///
/// For `nu >= 1` the root is bracketed by `(nu, nu + c0 nu^{1/3} + 3)`;
/// for smaller orders `(2, 4)` contains exactly one zero.
pub fn bessel_j_first_zero(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(KlsError::InvalidParameter(format!("Bessel order {nu}")));
    }
    let (lo, hi) = if nu >= 1.0 {
        (nu, nu + BESSEL_ZERO_C0 * nu.cbrt() + 3.0)
    } else {
        (2.0, 4.0)
    };
    bisect(|x| bessel_j(nu, x), lo, hi, 1e-12)
}

/// First positive zero `j'_{nu,1}` of `J'_nu`; for `nu = 0` this is `j_{1,1}`.
pub fn bessel_j_prime_first_zero(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(KlsError::InvalidParameter(format!("Bessel order {nu}")));
    }
    if nu == 0.0 {
        return bessel_j_first_zero(1.0);
    }
    let hi = bessel_j_first_zero(nu)?;
    let lo = if nu >= 1.0 { nu } else { 1e-3 };
    bisect(|x| bessel_j_prime(nu, x), lo, hi, 1e-12)
}

/// Two-term large-order approximation `nu + c0 nu^{1/3}` of `j_{nu,1}`.
pub fn bessel_zero_asymptote(nu: f64) -> f64 {
    nu + BESSEL_ZERO_C0 * nu.cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn series_and_integral_agree_in_overlap() {
        for &nu in &[0.0, 0.5, 1.0, 2.5, 7.0] {
            for &x in &[5.0, 6.5, 8.0] {
                let a = bessel_j_series(nu, x);
                let b = bessel_j_integral(nu, x);
                assert!((a - b).abs() < 1e-12, "nu={nu} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn half_order_is_elementary() {
        // J_{1/2}(x) = sqrt(2/(pi x)) sin x
        for &x in &[0.3, 2.0, 7.5, 11.0, 40.0] {
            let exact = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - exact).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn known_zeros() {
        assert_relative_eq!(bessel_j_first_zero(0.0).unwrap(), 2.404_825_557_695_773, epsilon = 1e-10);
        assert_relative_eq!(bessel_j_first_zero(0.5).unwrap(), PI, epsilon = 1e-10);
        assert_relative_eq!(bessel_j_first_zero(1.0).unwrap(), 3.831_705_970_207_512, epsilon = 1e-10);
        assert_relative_eq!(bessel_j_first_zero(4.0).unwrap(), 7.588_342_434_503_804, epsilon = 1e-9);
        assert_relative_eq!(bessel_j_prime_first_zero(1.0).unwrap(), 1.841_183_781_340_659, epsilon = 1e-10);
        assert_relative_eq!(bessel_j_prime_first_zero(0.0).unwrap(), 3.831_705_970_207_512, epsilon = 1e-10);
    }

    #[test]
    fn large_order_zero_tracks_asymptote() {
        let nu = 99.0;
        let z = bessel_j_first_zero(nu).unwrap();
        assert!(bessel_j(nu, z).abs() < 1e-10);
        // next term of the expansion is 1.033 nu^{-1/3}
        assert!((z - bessel_zero_asymptote(nu) - 1.033_150 / nu.cbrt()).abs() < 0.05);
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(gaussian_norm_mean(1), (2.0 / PI).sqrt(), epsilon = 1e-14);
    }
}
