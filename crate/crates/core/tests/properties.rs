use coulomb_gas::calibration::{classify_regime, mean_sum, ModelParams};
use coulomb_gas::sampler::{potential_from_spacings, potential_u, Configuration, McmcChain, McmcSettings};
use coulomb_gas::special_fn::bessel_k;
use coulomb_gas::stats::{effective_sample_size, summarize};
use coulomb_gas::theory::{a_coefficient, predict_spacing};
use coulomb_gas::tilted::truncated_moment;
use coulomb_gas::{QuadratureSettings, TiltedSpacingDist};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_recurrence(z in 0.5f64..200.0) {
        let k1 = bessel_k(1, z).unwrap();
        let k2 = bessel_k(2, z).unwrap();
        let k3 = bessel_k(3, z).unwrap();
        prop_assert!(((k3 - k1 - 4.0 / z * k2) / k3).abs() <= 1e-9);
    }

    #[test]
    fn truncated_moment_decreasing_in_theta(alpha in 0u32..3, theta in -50.0f64..500.0, beta in 0.25f64..4.0) {
        let qs = QuadratureSettings::default();
        let a = truncated_moment(alpha, theta, beta, &qs).unwrap();
        let b = truncated_moment(alpha, theta + 1.0, beta, &qs).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn tilted_law_normalized(theta in -1000.0f64..1e6, beta in 0.25f64..4.0) {
        let d = TiltedSpacingDist::new(beta, theta).unwrap();
        let total = d.expect(|_| 1.0, &[]).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-8);
        let m = d.mean_exact().unwrap();
        prop_assert!(m > 0.0 && m < 1.0);
        prop_assert!(d.var_exact().unwrap() > 0.0);
        prop_assert!(d.normalizer() >= 0.0 && d.ln_normalizer().is_finite());
    }

    #[test]
    fn tilted_mean_decreasing(theta in -200.0f64..1e5, step in 0.1f64..100.0, beta in 0.25f64..4.0) {
        let a = TiltedSpacingDist::new(beta, theta).unwrap().mean_exact().unwrap();
        let b = TiltedSpacingDist::new(beta, theta + step).unwrap().mean_exact().unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn asymptotic_moments_consistent(log_theta in 4.0f64..7.0, beta in 1.0f64..4.0) {
        let theta = 10f64.powf(log_theta);
        let d = TiltedSpacingDist::new(beta, theta).unwrap();
        prop_assume!(theta * beta >= 1e4);
        let gap = (d.mean_exact().unwrap() - d.mean_asymptotic().unwrap()).abs();
        prop_assert!(gap <= 5.0 * theta.powf(-1.5));
        let r = d.var_exact().unwrap() / d.var_asymptotic().unwrap();
        prop_assert!((0.98..=1.02).contains(&r));
    }

    #[test]
    fn quantile_inverts_tabulated_cdf(theta in -100.0f64..1e4, u in 0.001f64..0.999) {
        let d = TiltedSpacingDist::new(1.0, theta).unwrap();
        let x = d.quantile(u);
        prop_assert!(x > 0.0 && x <= 1.0);
        prop_assert!((d.tabulated_cdf(x) - u).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mean_sum_decreasing_in_lambda(n in 2usize..40, force in 0.0f64..200.0, lambda in -50.0f64..5000.0) {
        let p = ModelParams::new(n, 1.0, force).unwrap();
        let a = mean_sum(lambda, &p).unwrap();
        let b = mean_sum(lambda + 10.0, &p).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn chain_keeps_order_and_unit_sum(n in 2usize..30, force in 0.0f64..300.0, seed in 0u64..1000) {
        let p = ModelParams::new(n, 1.0, force).unwrap();
        let settings = McmcSettings { n_sweeps: 60, burn_in: 10, proposal_width: 0.5, seed, thinning: 1 };
        let chain = McmcChain::new(p, settings, Configuration::equally_spaced(n).unwrap()).unwrap();
        for v in chain {
            prop_assert!(v.x.iter().all(|&x| x > 0.0));
            prop_assert!((v.sum() - 1.0).abs() < 1e-12);
            let c = Configuration::from_spacings(&v.x).unwrap();
            let d = (potential_u(&c, &p) - potential_from_spacings(&v, &p)).abs();
            prop_assert!(d <= 1e-9 * potential_u(&c, &p).abs());
        }
    }

    #[test]
    fn summary_mean_matches_arithmetic(xs in prop::collection::vec(-5.0f64..5.0, 100..400)) {
        let s = summarize(&xs).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!((s.mean - m).abs() < 1e-12);
        prop_assert!(s.se >= 0.0 && s.variance >= 0.0);
        let ess = effective_sample_size(&xs);
        prop_assert!(ess > 0.0);
    }

    #[test]
    fn regime_b_tends_to_regime_a(n in 50usize..2000, k_frac in 0.0f64..1.0) {
        let k = ((k_frac * n as f64) as usize).clamp(1, n);
        let weak = ModelParams::linear(n, 1.0, 1e-7).unwrap();
        let a_lab = classify_regime(&weak, Some(0.0));
        let b_lab = classify_regime(&weak, Some(1.0));
        let pa = predict_spacing(&weak, k, &a_lab, None, None).unwrap();
        let pb = predict_spacing(&weak, k, &b_lab, None, None).unwrap();
        prop_assert!((pa.mean / pb.mean - 1.0).abs() < 1e-6);
        prop_assert!((pa.variance / pb.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn a_coefficient_increasing(n in 10usize..1000, f0 in 0.01f64..3.99) {
        let a: Vec<f64> = (1..=n).map(|k| a_coefficient(k, n, f0, 1.0).unwrap()).collect();
        prop_assert!(a.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn regime_b_means_sum_to_one() {
    for f0 in [1.0, 2.0, 3.0] {
        let p = ModelParams::linear(500, 1.0, f0).unwrap();
        let l = classify_regime(&p, None);
        let total: f64 = (1..=500).map(|k| predict_spacing(&p, k, &l, None, None).unwrap().mean).sum();
        assert!((total - 1.0).abs() < 3.0 / 500f64.sqrt(), "F0={f0}: {total}");
    }
}
