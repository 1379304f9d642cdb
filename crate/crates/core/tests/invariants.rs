use std::collections::BTreeMap;

use proptest::prelude::*;

use hwcert::chaining::{entropy_gamma, greedy_net, uniform_bound_value, BoundTerms, DistanceTag};
use hwcert::chaos::{centered_sup, decoupled_form, quad_form, MatrixFamily, TailCurve};
use hwcert::circulant::{
    build_vx, circ_convolve_direct, circ_convolve_fft, phi_apply, rip_exact, CirculantOperator,
    SparseSpec,
};
use hwcert::experiment::{ExperimentConfig, Subcommand};
use hwcert::norms::{
    entry_max, frobenius, spectral_norm_dense, two_to_inf, DenseMatrix, DEFAULT_TOL,
};
use hwcert::stats::clopper_pearson;
use hwcert::weibull::AlphaLaw;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn sized_matrix() -> impl Strategy<Value = DenseMatrix> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| matrix(r, c))
}

fn square_with_vecs() -> impl Strategy<Value = (DenseMatrix, Vec<f64>, Vec<f64>)> {
    (1usize..7).prop_flat_map(|n| {
        (
            matrix(n, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
    })
}

fn family(n: usize, max_members: usize) -> impl Strategy<Value = MatrixFamily> {
    prop::collection::vec(matrix(n, n), 1..max_members).prop_map(|m| MatrixFamily::new(m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_chain(a in sized_matrix()) {
        let (e, r, s, f) = (entry_max(&a), two_to_inf(&a), spectral_norm_dense(&a), frobenius(&a));
        prop_assert!(e <= r + 1e-12);
        prop_assert!(r <= s * (1.0 + 1e-9) + 1e-12);
        prop_assert!(s <= f * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn norms_are_homogeneous(a in sized_matrix(), c in -4.0f64..4.0) {
        let b = a.scaled(c);
        prop_assert!(close(frobenius(&b), c.abs() * frobenius(&a), 1e-12));
        prop_assert!(close(two_to_inf(&b), c.abs() * two_to_inf(&a), 1e-12));
        prop_assert!(close(spectral_norm_dense(&b), c.abs() * spectral_norm_dense(&a), 1e-9));
    }

    #[test]
    fn family_profile_matches_dense(a in sized_matrix()) {
        let fam = MatrixFamily::singleton(a.clone()).unwrap();
        prop_assert!(close(fam.norms().spectral, spectral_norm_dense(&a), 10.0 * DEFAULT_TOL + 1e-9));
    }

    #[test]
    fn decoupled_form_is_bilinear((a, x, y) in square_with_vecs(), c in -3.0f64..3.0) {
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        let base = decoupled_form(&a, &x, &y).unwrap();
        prop_assert!(close(decoupled_form(&a, &cx, &y).unwrap(), c * base, 1e-10));
        let split = decoupled_form(&a, &x, &y).unwrap() + decoupled_form(&a, &y, &y).unwrap();
        prop_assert!(close(decoupled_form(&a, &sum, &y).unwrap(), split, 1e-10));
        prop_assert!(close(decoupled_form(&a, &x, &x).unwrap(), quad_form(&a, &x).unwrap(), 1e-10));
    }

    #[test]
    fn quad_form_sees_only_symmetric_part((a, x, _) in square_with_vecs()) {
        let sym = a.add(&a.transpose()).unwrap().scaled(0.5);
        prop_assert!(close(quad_form(&a, &x).unwrap(), quad_form(&sym, &x).unwrap(), 1e-10));
    }

    #[test]
    fn centered_sup_scales_quadratically(
        fam in family(4, 5),
        xi in prop::collection::vec(-3.0f64..3.0, 4),
        c in 0.1f64..5.0,
    ) {
        let base = centered_sup(&fam, &xi).unwrap();
        let scaled = centered_sup(&fam.scaled(c).unwrap(), &xi).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(close(scaled, c * c * base, 1e-9));
    }

    #[test]
    fn greedy_net_covers_and_packs(fam in family(3, 12), radius in 0.05f64..6.0) {
        let tag = DistanceTag::Spectral;
        let net = greedy_net(&fam, tag, radius).unwrap();
        let m = fam.members();
        let d = |i: usize, j: usize| tag.distance(&m[i], &m[j]).unwrap();
        prop_assert!(!net.is_empty());
        for i in 0..m.len() {
            prop_assert!(net.iter().any(|&c| d(i, c) <= radius * (1.0 + 1e-9)));
        }
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                prop_assert!(d(i, j) > radius * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn net_size_non_increasing_in_radius(fam in family(3, 12), r in 0.05f64..3.0) {
        let small = greedy_net(&fam, DistanceTag::TwoToInf, r).unwrap().len();
        let large = greedy_net(&fam, DistanceTag::TwoToInf, 2.0 * r).unwrap().len();
        prop_assert!(large <= small);
    }

    #[test]
    fn entropy_gamma_is_homogeneous(fam in family(3, 8), c in 0.25f64..4.0) {
        for exponent in [2.0, 1.0, 0.5] {
            let base = entropy_gamma(&fam, DistanceTag::Spectral, exponent).unwrap();
            let scaled = entropy_gamma(&fam.scaled(c).unwrap(), DistanceTag::Spectral, exponent).unwrap();
            prop_assert!(base >= 0.0);
            prop_assert!(close(scaled, c * base, 1e-6));
        }
    }

    #[test]
    fn uniform_bound_non_increasing(
        u1 in 0.0f64..10.0, u2 in 0.0f64..10.0, u3 in 0.0f64..10.0,
        c1 in 0.1f64..50.0, m22 in 0.0f64..5.0, alpha in 0.1f64..=1.0,
        t in 0.0f64..100.0, dt in 0.0f64..100.0,
    ) {
        let terms = BoundTerms { u1, u2, u3, fitted_c: 1.0, fitted_c1: c1 };
        let a = uniform_bound_value(&terms, alpha, m22, t);
        let b = uniform_bound_value(&terms, alpha, m22, t + dt);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn fft_matches_direct(n in 1usize..300, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = hwcert::rng::rng_from_seed(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = circ_convolve_fft(&z, &x).unwrap();
        let b = circ_convolve_direct(&z, &x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn vx_applied_to_generator_is_phi_x(
        (z, x, omega) in (2usize..24).prop_flat_map(|n| (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n),
        ))
    ) {
        let n = z.len();
        let op = CirculantOperator::new(z.clone(), omega.clone()).unwrap();
        let lhs = build_vx(&x, &omega, n).unwrap().mul_vec(&z).unwrap();
        let rhs = phi_apply(&op, &x).unwrap();
        let dense = op.matrix().mul_vec(&x).unwrap();
        for ((a, b), c) in lhs.iter().zip(&rhs).zip(&dense) {
            prop_assert!((a - b).abs() < 1e-10 && (b - c).abs() < 1e-10);
        }
    }

    #[test]
    fn rip_constant_monotone_in_s(
        (z, omega) in (4usize..9).prop_flat_map(|n| (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n),
        ))
    ) {
        let n = z.len();
        let phi = CirculantOperator::new(z, omega).unwrap().matrix();
        let mut prev = 0.0;
        for s in 1..=3 {
            let d = rip_exact(&phi, SparseSpec::new(s, n).unwrap()).unwrap().delta;
            prop_assert!(d >= prev - 1e-12);
            prev = d;
        }
    }

    #[test]
    fn clopper_pearson_brackets_rate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((trials as f64) * frac).floor() as u64;
        let (lo, hi) = clopper_pearson(k, trials, 0.05);
        let rate = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= rate + 1e-12);
        prop_assert!(rate <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn tail_curve_is_monotone(samples in prop::collection::vec(0.0f64..10.0, 1..200)) {
        let thresholds: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let c = TailCurve::from_samples(&samples, thresholds, 0).unwrap();
        for w in c.survival.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for k in 0..c.len() {
            prop_assert!(c.ci_low[k] <= c.survival[k] && c.survival[k] <= c.ci_high[k]);
        }
    }

    #[test]
    fn survival_is_a_tail(alpha in 0.05f64..=1.0, x in 0.0f64..50.0, dx in 0.0f64..50.0, std in any::<bool>()) {
        let law = if std { AlphaLaw::standardized(alpha) } else { AlphaLaw::raw(alpha) }.unwrap();
        let (a, b) = (law.survival(x), law.survival(x + dx));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn config_round_trips(
        alpha in 0.01f64..=1.0,
        n in 4u64..64,
        s in 1u64..4,
        trials in 1u64..1000,
        seed in any::<u64>(),
        delta in 0.01f64..1.0,
    ) {
        let params: BTreeMap<String, serde_json::Value> = serde_json::from_value(serde_json::json!({
            "alpha": alpha, "n": n, "m_grid": [1, n / 2 + 1, n], "s": s,
            "delta_target": delta, "trials": trials, "seed": seed,
        }))
        .unwrap();
        let config = ExperimentConfig::new(Subcommand::Rip, params).unwrap();
        let back = ExperimentConfig::from_json(&config.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &config);
        prop_assert_eq!(back.seed().unwrap(), seed);
    }
}
