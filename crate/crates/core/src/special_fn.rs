//! Modified Bessel functions of the second kind for orders 1–3 and the
//! moment integrals of the tilted spacing law that they represent.
//!
//! `K_ν(z)` is evaluated from its integral representation
//! `∫₀^∞ exp(-z cosh t) cosh(νt) dt`; beyond `z = 700` the Hankel asymptotic
//! series is summed instead. Every quantity is also available in an
//! exponentially scaled or logarithmic form, since `K_ν(z)` underflows for
//! `z ≳ 745`.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSettings};

/// Above this argument the asymptotic series replaces quadrature.
pub const ASYMPTOTIC_THRESHOLD: f64 = 700.0;

fn check_order(order: i32) -> Result<()> {
    if (1..=3).contains(&order) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(order))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn bessel_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-14,
        abs_tol: 1e-300,
        max_subdivisions: 2000,
    }
}

/// `exp(z) · K_ν(z)` from the Hankel expansion, summed until the terms stop
/// shrinking or fall below double precision.
pub fn bessel_k_scaled_asymptotic(order: i32, z: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::FRAC_PI_2 / z).sqrt() * sum
}

/// Two-term truncation `√(π/2) e^{-z}/√z (1 + (4ν²-1)/(8z))`.
pub fn bessel_k_two_term(order: i32, z: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    (std::f64::consts::FRAC_PI_2 / z).sqrt() * (-z).exp() * (1.0 + (mu - 1.0) / (8.0 * z))
}

fn bessel_k_scaled_quadrature(order: i32, z: f64) -> Result<f64> {
    let nu = order as f64;
    // log of the scaled integrand exp(-z (cosh t - 1)) cosh(νt)
    let log_g = |t: f64| -z * (t.cosh() - 1.0) + (nu * t).cosh().ln();
    let mut t = 0.0;
    let mut peak_t = 0.0;
    let mut peak = log_g(0.0);
    let step = 0.25;
    loop {
        t += step;
        let lg = log_g(t);
        if lg > peak {
            peak = lg;
            peak_t = t;
        } else if lg < peak - 60.0 {
            break;
        }
    }
    let t_max = t;
    let mut points = vec![0.0];
    let mut p = 1.0;
    while p < t_max {
        points.push(p);
        p += 1.0;
    }
    if peak_t > 0.0 && !points.contains(&peak_t) {
        points.push(peak_t);
    }
    points.push(t_max);
    points.sort_by(f64::total_cmp);
    let shift = peak;
    let est = integrate(
        |t| (-z * (t.cosh() - 1.0) + (nu * t).cosh().ln() - shift).exp(),
        &points,
        &bessel_settings(),
    )?;
    Ok(est.value * shift.exp())
}

/// `exp(z) · K_order(z)`. Never underflows.
pub fn bessel_k_scaled(order: i32, z: f64) -> Result<f64> {
    check_order(order)?;
    check_positive("z", z)?;
    if z > ASYMPTOTIC_THRESHOLD {
        Ok(bessel_k_scaled_asymptotic(order, z))
    } else {
        bessel_k_scaled_quadrature(order, z)
    }
}

/// `K_order(z)` for order in {1, 2, 3} and z > 0. Underflows to zero for
/// `z ≳ 745`; use [`ln_bessel_k`] there.
pub fn bessel_k(order: i32, z: f64) -> Result<f64> {
    Ok(bessel_k_scaled(order, z)? * (-z).exp())
}

pub fn ln_bessel_k(order: i32, z: f64) -> Result<f64> {
    Ok(bessel_k_scaled(order, z)?.ln() - z)
}

fn check_integral_args(alpha: i32, lambda: f64, beta: f64) -> Result<()> {
    check_order(alpha)?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!(
            "lambda must be positive for the infinite-range integral, got {lambda}"
        )));
    }
    check_positive("beta", beta)
}

/// `ln I_α(λ, β)` where `I_α = ∫₀^∞ x^{α-1} e^{-λx-β/x} dx
/// = 2 β^{α/2} K_α(2√(λβ)) / λ^{α/2}`.
pub fn ln_integral_i(alpha: i32, lambda: f64, beta: f64) -> Result<f64> {
    check_integral_args(alpha, lambda, beta)?;
    let z = 2.0 * (lambda * beta).sqrt();
    let a = alpha as f64;
    Ok(std::f64::consts::LN_2 + 0.5 * a * (beta.ln() - lambda.ln()) + ln_bessel_k(alpha, z)?)
}

/// `I_α(λ, β) · exp(2√(λβ))`, free of underflow.
pub fn integral_i_scaled(alpha: i32, lambda: f64, beta: f64) -> Result<f64> {
    check_integral_args(alpha, lambda, beta)?;
    let z = 2.0 * (lambda * beta).sqrt();
    let a = alpha as f64;
    Ok(2.0 * (beta / lambda).powf(0.5 * a) * bessel_k_scaled(alpha, z)?)
}

/// `I_α(λ, β)` through the Bessel closed form.
pub fn integral_i(alpha: i32, lambda: f64, beta: f64) -> Result<f64> {
    Ok(ln_integral_i(alpha, lambda, beta)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(bessel_k(0, 1.0), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(bessel_k(4, 1.0), Err(Error::UnsupportedOrder(4))));
        assert!(matches!(bessel_k(1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1, -2.0), Err(Error::Domain(_))));
        assert!(matches!(integral_i(1, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(integral_i(1, -1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(integral_i(2, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn known_values() {
        // reference values of K_1(1), K_2(2), K_3(0.5)
        let cases = [
            (1, 1.0, 0.601_907_230_197_234_6),
            (2, 2.0, 0.253_759_754_566_055_9),
            (3, 0.5, 62.057_909_529_930_25),
        ];
        for (nu, z, want) in cases {
            let got = bessel_k(nu, z).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "K_{nu}({z}) = {got}");
        }
    }

    #[test]
    fn order_three_follows_recurrence() {
        let z = 2.5;
        let k3 = bessel_k(3, z).unwrap();
        let rhs = bessel_k(1, z).unwrap() + (4.0 / z) * bessel_k(2, z).unwrap();
        assert!(((k3 - rhs) / k3).abs() < 1e-12);
    }

    #[test]
    fn large_argument_matches_two_term_expansion() {
        let z = 100.0;
        let k = bessel_k(1, z).unwrap();
        let approx = bessel_k_two_term(1, z);
        assert!(((k - approx) / k).abs() < 1e-4);
    }

    #[test]
    fn asymptotic_and_quadrature_agree_at_switch() {
        for nu in 1..=3 {
            let q = bessel_k_scaled_quadrature(nu, 690.0).unwrap();
            let a = bessel_k_scaled_asymptotic(nu, 690.0);
            assert!(((q - a) / a).abs() < 1e-12);
        }
    }

    #[test]
    fn small_argument_accuracy() {
        // K_1(z) ~ 1/z for small z
        let z = 1e-3;
        let k1 = bessel_k(1, z).unwrap();
        assert!((k1 * z - 1.0).abs() < 1e-4);
        // K_3(z) ~ 8/z^3
        let k3 = bessel_k(3, z).unwrap();
        assert!((k3 * z.powi(3) / 8.0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn closed_form_special_case() {
        // I_1(4, 1) = 2 (1/4)^{1/2} K_1(4) = K_1(4)
        let i = integral_i(1, 4.0, 1.0).unwrap();
        let k = bessel_k(1, 4.0).unwrap();
        assert!(((i - k) / k).abs() < 1e-13);
    }

    #[test]
    fn integral_decreases_in_lambda() {
        assert!(integral_i(1, 20.0, 1.0).unwrap() < integral_i(1, 10.0, 1.0).unwrap());
    }

    #[test]
    fn log_form_survives_underflow() {
        let l = ln_bessel_k(2, 5000.0).unwrap();
        assert!(l.is_finite() && l < -4990.0);
        assert_eq!(bessel_k(2, 5000.0).unwrap(), 0.0);
    }
}
