mod common;

use common::*;
use coulomb_gas::calibration::{mean_sum, solve_lambda, solve_lambda0, ModelParams};
use coulomb_gas::oracle::{conditional_density_convolution, conditional_moment_bruteforce, conditional_moment_tensor};
use coulomb_gas::special_fn::{bessel_k, bessel_k_two_term, integral_i, integral_i_scaled};
use coulomb_gas::tilted::truncated_moment;
use coulomb_gas::{QuadratureSettings, TiltedSpacingDist};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn bessel_k1_at_one() {
    // K_1(1) by tanh-sinh on the cosh representation mapped to (0, 1)
    let r = tanh_sinh(
        |t, c| {
            let u = t / c;
            if u > 50.0 {
                return 0.0;
            }
            (-(u.cosh())).exp() * u.cosh() / (c * c)
        },
        1e-14,
    );
    assert!(rel(bessel_k(1, 1.0).unwrap(), r) < 1e-10);
    assert!((bessel_k(1, 1.0).unwrap() - 0.6019072302).abs() < 1e-10);
}

#[test]
fn bessel_large_argument_truncation() {
    let exact = bessel_k(1, 100.0).unwrap();
    assert!(rel(bessel_k_two_term(1, 100.0), exact) < 1e-4);
}

#[test]
fn integral_closed_form_matches_infinite_quadrature() {
    let scaled = integral_i_scaled(1, 10.0, 1.0).unwrap();
    assert!(rel(scaled, infinite_moment_scaled(1, 10.0, 1.0)) < 1e-9);
    let four = integral_i(1, 4.0, 1.0).unwrap();
    assert!(rel(four, bessel_k(1, 4.0).unwrap()) < 1e-13);
    assert!(integral_i(1, 20.0, 1.0).unwrap() < integral_i(1, 10.0, 1.0).unwrap());
}

#[test]
fn truncated_moment_matches_tanh_sinh() {
    let qs = QuadratureSettings::default();
    for (alpha, theta, beta) in [(0, -5.0, 1.0), (1, 0.0, 1.0), (2, 10.0, 0.25), (0, 300.0, 4.0), (1, -50.0, 0.5)] {
        let a = truncated_moment(alpha, theta, beta, &qs).unwrap();
        let b = truncated_moment_ref(alpha as i32, theta, beta);
        assert!(rel(a, b) < 1e-9, "{alpha} {theta} {beta}: {a} vs {b}");
    }
    assert!((truncated_moment(1, 0.0, 0.0, &qs).unwrap() - 0.5).abs() < 1e-14);
}

#[test]
fn truncated_moment_tail_bound() {
    let qs = QuadratureSettings::default();
    let t = truncated_moment(0, 1000.0, 1.0, &qs).unwrap();
    let full = integral_i(1, 1000.0, 1.0).unwrap();
    // the tail beyond 1 is below e^{-500} relative to e^{-2√1000}
    assert!((t - full).abs() <= 1e-10 * full);
}

#[test]
fn tilted_mean_asymptotics() {
    let d = TiltedSpacingDist::new(1.0, 1e6).unwrap();
    let m = d.mean_exact().unwrap();
    assert!((m - 0.00100075).abs() < 0.01 * 0.75e-6);
    let v = d.var_exact().unwrap();
    assert!(rel(v, 5.0e-10) < 0.02);
    let d = TiltedSpacingDist::new(1.0, 1e4).unwrap();
    assert!((d.mean_asymptotic().unwrap() - 0.010075).abs() < 1e-15);
    assert!((d.cdf(d.mode()).unwrap() - 0.5).abs() < 0.05);
}

#[test]
fn tilted_sample_mean_monte_carlo() {
    let d = TiltedSpacingDist::new(1.0, 1e4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
    let (m, se) = mean_se(&x);
    assert!((m - d.mean_exact().unwrap()).abs() < 4.0 * se);
}

#[test]
fn sampler_passes_two_sample_ks() {
    // reference draws by bisection on the quadrature CDF
    for (seed, theta) in [(1u64, 50.0), (2, -10.0), (3, 1e4)] {
        let d = TiltedSpacingDist::new(1.0, theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..4000).map(|_| d.sample(&mut rng)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let b: Vec<f64> = (0..400)
            .map(|_| {
                let u: f64 = rand::Rng::random(&mut rng);
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if d.cdf(mid).unwrap() < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let stat = ks_two_sample(&a, &b);
        assert!(stat < ks_critical(a.len(), b.len(), 0.01), "theta {theta}: D = {stat}");
    }
}

#[test]
fn calibration_case_a_root() {
    let p = ModelParams::new(100, 1.0, 0.0).unwrap();
    let r = solve_lambda(&p).unwrap();
    assert!(r.residual <= 1e-9);
    assert!(rel(r.lambda, 10100.0) < 0.05);
    // bracket check against the mean sum directly
    assert!(mean_sum(r.lambda * 0.99, &p).unwrap() > 1.0);
    assert!(mean_sum(r.lambda * 1.01, &p).unwrap() < 1.0);
}

#[test]
fn lambda0_first_spacing_mean() {
    let l0 = solve_lambda0(1.0, 8.0).unwrap();
    let m = truncated_moment_ref(1, l0, 1.0) / truncated_moment_ref(0, l0, 1.0);
    assert!((m - (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
    assert!(solve_lambda0(1.0, 4.0).is_err());
}

#[test]
fn pair_oracle_matches_simpson() {
    let w = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            (-1.0 / x - 1.0 / (1.0 - x) - 4.0 * x - 8.0 * (1.0 - x)).exp()
        }
    };
    let num = simpson(|x| x * w(x), 0.0, 1.0, 200_000);
    let den = simpson(w, 0.0, 1.0, 200_000);
    let p = ModelParams::new(2, 1.0, 4.0).unwrap();
    let r = conditional_moment_bruteforce(&p, 1, 1).unwrap();
    assert!((r.value - num / den).abs() < 1e-9, "{} vs {}", r.value, num / den);
    let sym = conditional_moment_bruteforce(&ModelParams::new(2, 1.0, 0.0).unwrap(), 1, 1).unwrap();
    assert!((sym.value - 0.5).abs() < 1e-12);
}

#[test]
fn triple_oracle_matches_tensor_grid() {
    let p = ModelParams::new(3, 1.0, 6.0).unwrap();
    let a = conditional_moment_bruteforce(&p, 2, 1).unwrap();
    let b = conditional_moment_tensor(&p, 2, 1).unwrap();
    assert!((a.value - b).abs() < 1e-8);
    assert!(a.error_estimate <= 1e-8 * a.value.abs() + 1e-12);
}

#[test]
fn convolution_density_normalized_and_tilt_free() {
    let p = ModelParams::new(2, 1.0, 4.0).unwrap();
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let d0 = conditional_density_convolution(&p, 1, &grid, 0.0).unwrap();
    let d1 = conditional_density_convolution(&p, 1, &grid, 4.0).unwrap();
    for (a, b) in d0.iter().zip(&d1) {
        assert!((a - b).abs() < 1e-7);
    }
    // Simpson over the grid
    let h = 1.0 / 2000.0;
    let integral: f64 = d0
        .iter()
        .enumerate()
        .map(|(i, v)| v * if i == 0 || i == 2000 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((integral - 1.0).abs() < 1e-7);
    let first: f64 = d0
        .iter()
        .enumerate()
        .map(|(i, v)| grid[i] * v * if i == 0 || i == 2000 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum::<f64>()
        * h
        / 3.0;
    let brute = conditional_moment_bruteforce(&p, 1, 1).unwrap().value;
    assert!((first - brute).abs() < 1e-7);
}
