//! Cancellation-free evaluation of `(e^{xt} − 1)/x` and related
//! differences of exponentials.

use num_complex::Complex64;

/// Below this `|x t|` the Taylor series replaces the direct formula.
const SERIES_THRESHOLD: f64 = 1e-4;

/// `(e^{xt} − 1)/x` for complex `x`, equal to `t` at `x = 0`.
pub fn phi1(x: Complex64, t: f64) -> Complex64 {
    let z = x * t;
    if z.norm() < SERIES_THRESHOLD {
        return series(z) * t;
    }
    expm1_complex(z) / x
}

/// Real-argument version of [`phi1`].
pub fn phi1_real(x: f64, t: f64) -> f64 {
    let z = x * t;
    if z.abs() < SERIES_THRESHOLD {
        // Horner form of 1 + z/2 + z²/6 + z³/24 + z⁴/120 + z⁵/720
        let s =
            1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0 * (1.0 + z / 5.0 * (1.0 + z / 6.0))));
        return s * t;
    }
    z.exp_m1() / x
}

/// `(e^{−αt} − e^{−βt}) / (β − α)` for non-negative rates, continuous at
/// `α = β` where it equals `t e^{−αt}`. Never overflows for large `t`.
pub fn exp_difference(alpha: f64, beta: f64, t: f64) -> f64 {
    let slow = alpha.min(beta);
    let gap = (beta - alpha).abs();
    (-slow * t).exp() * phi1_real(-gap, t)
}

fn series(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    one + z / 2.0 * (one + z / 3.0 * (one + z / 4.0 * (one + z / 5.0 * (one + z / 6.0))))
}

fn expm1_complex(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (z.im / 2.0).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi1_examples() {
        assert_eq!(phi1(c(0.0, 0.0), 5.0), c(5.0, 0.0));
        let v = phi1(c(1.0, 0.0), 1.0);
        assert!((v.re - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        // (e^{2e-14} - 1)/1e-14 = 2 + 2e-14 + O(1e-28)
        let v = phi1(c(1e-14, 0.0), 2.0);
        assert!((v.re - 2.000_000_000_000_02).abs() < 1e-15);
    }

    #[test]
    fn phi1_continuous_across_zero() {
        // The symmetric difference is ε t² from the slope t²/2 at x = 0;
        // anything beyond that would be a jump between the two branches.
        for &t in &[0.1, 1.0, 10.0, 100.0] {
            let eps = 1e-8;
            let slope = eps * t * t;
            let d = phi1(c(eps, 0.0), t) - phi1(c(-eps, 0.0), t);
            assert!((d.re - slope).abs() <= 1e-10 * t, "t={t}: {d}");
            assert!(d.im.abs() <= 1e-10 * t);
            let d = phi1_real(eps, t) - phi1_real(-eps, t);
            assert!((d - slope).abs() <= 1e-10 * t);
        }
    }

    /// Reference via a long Taylor series, accurate for |z| <= 1.
    fn taylor_ref(z: Complex64, t: f64) -> Complex64 {
        let mut term = c(1.0, 0.0);
        let mut sum = c(1.0, 0.0);
        for k in 1..60 {
            term = term * z / (k as f64 + 1.0);
            sum += term;
        }
        sum * t
    }

    #[test]
    fn phi1_relative_accuracy_small_arguments() {
        let t = 1.7;
        for &mag in &[1e-12, 1e-6, 5e-5, 1e-4, 2e-4, 1e-3, 0.1, 0.5, 1.0] {
            for &ang in &[0.0, 0.7, 1.5, 2.4, std::f64::consts::PI] {
                let z = Complex64::from_polar(mag, ang);
                let x = z / t;
                let got = phi1(x, t);
                let want = taylor_ref(z, t);
                let rel = (got - want).norm() / want.norm();
                assert!(rel <= 1e-12, "|z|={mag} arg={ang}: rel {rel:e}");
            }
        }
    }

    #[test]
    fn real_matches_complex() {
        for &x in &[-3.0, -1e-5, 0.0, 2e-5, 0.4, 2.0] {
            for &t in &[0.0, 0.5, 3.0] {
                let a = phi1_real(x, t);
                let b = phi1(c(x, 0.0), t).re;
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn exp_difference_limits() {
        let t = 2.5;
        let e = exp_difference(0.3, 0.3, t);
        assert!((e - t * (-0.3 * t).exp()).abs() < 1e-15);
        let direct = ((-0.2f64 * t).exp() - (-0.9f64 * t).exp()) / 0.7;
        assert!((exp_difference(0.2, 0.9, t) - direct).abs() < 1e-15);
        assert_eq!(exp_difference(0.2, 0.9, t), exp_difference(0.9, 0.2, t));
        assert_eq!(exp_difference(0.5, 1.0, 0.0), 0.0);
        // no overflow at huge times
        let v = exp_difference(1e-3, 1.5, 1e6);
        assert!(v.is_finite() && v >= 0.0);
    }
}
