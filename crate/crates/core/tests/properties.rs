//! Property tests for the structural invariants: exact involutions, exact
//! sphere-noise geometry, activation identities, mixture optimality, and
//! margin scale invariance.

use marginlab::linalg::{activation, gram_deviation};
use marginlab::linear_margin::optimal_mixture;
use marginlab::synthdata::{
    opposite_linear, opposite_xor, sample_linear, sample_xor, LinearSpec, OppositeVariant, XorSpec,
};
use marginlab::xor_net::{construct_signal_net, normalized_margin};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_noise_geometry_and_involutions(
        d in 3usize..48,
        n in 1usize..16,
        sigma in 0.05f64..2.0,
        seed in 0u64..1_000_000,
    ) {
        let spec = LinearSpec::canonical(d, sigma, n).unwrap();
        let ds = sample_linear(&spec, seed).unwrap();
        let target = (d - 1) as f64 * sigma * sigma;
        for j in 0..n {
            let norm2 = ds.xi.column(j).dot(&ds.xi.column(j));
            prop_assert!((norm2 - target).abs() <= 1e-9 * target);
            prop_assert!(ds.xi.column(j).dot(&spec.mu).abs() <= 1e-9 * norm2.sqrt());
            prop_assert_eq!(spec.mu.dot(&ds.x.column(j)).signum(), ds.y[j]);
        }
        for variant in [OppositeVariant::Psi, OppositeVariant::PsiBar] {
            let twice = opposite_linear(
                &opposite_linear(&ds, &spec, variant).unwrap(), &spec, variant).unwrap();
            prop_assert_eq!(&twice, &ds);
        }
    }

    #[test]
    fn xor_noise_geometry_and_involution(
        d in 4usize..48,
        n in 1usize..16,
        sigma in 0.05f64..2.0,
        seed in 0u64..1_000_000,
    ) {
        let spec = XorSpec::canonical(d, sigma, n, 1.5, 8).unwrap();
        let ds = sample_xor(&spec, seed).unwrap();
        let target = (d - 2) as f64 * sigma * sigma;
        for j in 0..n {
            let norm2 = ds.xi.column(j).dot(&ds.xi.column(j));
            prop_assert!((norm2 - target).abs() <= 1e-9 * target);
            prop_assert!(ds.xi.column(j).dot(&spec.mu1).abs() <= 1e-9 * norm2.sqrt().max(1e-9));
            prop_assert!(ds.xi.column(j).dot(&spec.mu2).abs() <= 1e-9 * norm2.sqrt().max(1e-9));
            let a = spec.mu1.dot(&ds.x.column(j));
            let b = spec.mu2.dot(&ds.x.column(j));
            prop_assert_eq!((a * a - b * b).signum(), ds.y[j]);
        }
        let twice = opposite_xor(&opposite_xor(&ds, &spec).unwrap(), &spec).unwrap();
        prop_assert_eq!(&twice, &ds);
    }

    #[test]
    fn activation_identities(
        h in 1.0f64..2.0,
        s in -5.0f64..5.0,
        t in -5.0f64..5.0,
        c in 0.01f64..20.0,
    ) {
        // Subadditivity up to the 2^{h-1} factor.
        let lhs = activation(s + t, h);
        let rhs = 2.0_f64.powf(h - 1.0) * (activation(s, h) + activation(t, h));
        prop_assert!(lhs <= rhs + 1e-10 * rhs.max(1.0));
        // Positive homogeneity of degree h.
        let scaled = activation(c * s, h);
        let predicted = c.powf(h) * activation(s, h);
        prop_assert!((scaled - predicted).abs() <= 1e-10 * predicted.abs().max(1e-12));
    }

    #[test]
    fn mixture_closed_form_dominates_grid(
        gamma_g in 0.0f64..4.0,
        gamma_b in 0.0f64..4.0,
    ) {
        prop_assume!(gamma_g + gamma_b > 1e-9);
        let (a, b, value) = optimal_mixture(gamma_g, gamma_b).unwrap();
        prop_assert!((a * a + b * b - 1.0).abs() <= 1e-12);
        prop_assert!((a * gamma_g + b * gamma_b - value).abs() <= 1e-12);
        for i in 0..=40 {
            let theta = i as f64 / 40.0 * std::f64::consts::FRAC_PI_2;
            prop_assert!(theta.cos() * gamma_g + theta.sin() * gamma_b <= value + 1e-12);
        }
    }

    #[test]
    fn normalized_margin_scale_invariant(
        scale in 0.05f64..20.0,
        seed in 0u64..100_000,
    ) {
        let spec = XorSpec::canonical(12, 0.3, 10, 1.5, 8).unwrap();
        let ds = sample_xor(&spec, seed).unwrap();
        let net = construct_signal_net(&spec).unwrap();
        let base = normalized_margin(&net, &ds).normalized_margin;
        let mut scaled = net.clone();
        scaled.w.mapv_inplace(|v| v * scale);
        let m = normalized_margin(&scaled, &ds).normalized_margin;
        prop_assert!((m - base).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn gram_deviation_column_permutation_invariance(seed in 0u64..100_000) {
        let spec = LinearSpec::canonical(64, 1.0, 10).unwrap();
        let ds = sample_linear(&spec, seed).unwrap();
        let dev = gram_deviation(ds.xi.view(), 1.0, 63).unwrap().spectral_norm_dev;
        let perm: Vec<usize> = (0..10).rev().collect();
        let permuted = ds.xi.select(ndarray::Axis(1), &perm);
        let dev_p = gram_deviation(permuted.view(), 1.0, 63).unwrap().spectral_norm_dev;
        prop_assert!((dev - dev_p).abs() <= 1e-12);
    }
}
