use gensmooth::instrumentation::{
    build_stopping_ensemble, check_stopping_identities, compensation_sets, decorrelated_step,
};
use gensmooth::numerics::{derive_stream, quantile_se, LogMagnitude};
use gensmooth::objectives::{make_composite_growth, make_monomial, make_quadratic, Objective};
use gensmooth::optimizers::*;
use gensmooth::oracles::make_affine_oracle;
use proptest::prelude::*;

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        (0.01f64..2.0, 0.01f64..5.0).prop_map(|(eta, b0_sq)| Algorithm::AdagradNorm { eta, b0_sq }),
        (0.01f64..2.0, 0.0f64..3.0).prop_map(|(eta, gamma)| Algorithm::Normalized { eta, gamma }),
        (0.01f64..2.0, 0.0f64..3.0).prop_map(|(eta, gamma)| Algorithm::Clipped { eta, gamma }),
        (0.01f64..2.0, 0.0f64..0.95).prop_map(|(eta, beta)| Algorithm::SignMomentum { eta, beta }),
    ]
}

fn objective() -> impl Strategy<Value = Objective> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|l0| make_quadratic(l0, vec![0.5, -1.0]).unwrap()),
        (2u32..6).prop_map(|k| make_monomial(k, 1.0, vec![0.0]).unwrap()),
        Just(make_composite_growth(1.0, 1.0).unwrap()),
    ]
}

fn start(obj: &Objective) -> Vec<f64> {
    vec![1.5; obj.dim()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_are_bounded_by_eta(obj in objective(), alg in algorithm(), s0 in 0.0f64..2.0, s1 in 0.0f64..3.0, seed in any::<u64>()) {
        let o = make_affine_oracle(s0, s1, 0.1).unwrap();
        let spec = RunSpec { objective: &obj, oracle: &o, algorithm: alg, tie_break: TieBreak::Plus, horizon: 60 };
        let rec = run_trajectory(&spec, &start(&obj), &derive_stream(seed, 0), None).unwrap();
        prop_assert_eq!(bounded_step_violations(&rec), 0);
    }

    #[test]
    fn adagrad_log_sum_inequality(obj in objective(), eta in 0.01f64..1.0, b0_sq in 0.01f64..5.0, s0 in 0.0f64..2.0, s1 in 0.0f64..3.0, seed in any::<u64>()) {
        let o = make_affine_oracle(s0, s1, 0.1).unwrap();
        let spec = RunSpec { objective: &obj, oracle: &o, algorithm: Algorithm::AdagradNorm { eta, b0_sq }, tie_break: TieBreak::Plus, horizon: 80 };
        let rec = run_trajectory(&spec, &start(&obj), &derive_stream(seed, 1), None).unwrap();
        prop_assert!(log_sum_margin(&rec).unwrap() >= -1e-9);
    }

    #[test]
    fn one_step_gradient_bound(obj in objective(), frac in 0.05f64..1.0, s0 in 0.0f64..2.0, s1 in 0.0f64..3.0, seed in any::<u64>()) {
        let l1 = obj.smoothness.l1;
        let eta = if l1 > 0.0 { frac / l1 } else { frac };
        let o = make_affine_oracle(s0, s1, 0.1).unwrap();
        let spec = RunSpec { objective: &obj, oracle: &o, algorithm: Algorithm::AdagradNorm { eta, b0_sq: 0.5 }, tie_break: TieBreak::Plus, horizon: 80 };
        let rec = run_trajectory(&spec, &start(&obj), &derive_stream(seed, 2), None).unwrap();
        prop_assert_eq!(one_step_gradient_violations(&rec, obj.smoothness.l0, l1), 0);
    }

    #[test]
    fn same_seed_same_fingerprint(alg in algorithm(), seed in any::<u64>()) {
        let f = make_quadratic(1.0, vec![0.0]).unwrap();
        let o = make_affine_oracle(0.5, 1.5, 0.2).unwrap();
        let spec = RunSpec { objective: &f, oracle: &o, algorithm: alg, tie_break: TieBreak::Plus, horizon: 40 };
        let a = run_trajectory(&spec, &[2.0], &derive_stream(seed, 9), None).unwrap();
        let b = run_trajectory(&spec, &[2.0], &derive_stream(seed, 9), None).unwrap();
        prop_assert_eq!(a.fingerprint(), b.fingerprint());
        // Replaying the drawn factors reproduces the run exactly.
        let c = run_trajectory(&spec, &[2.0], &derive_stream(seed, 9), Some(&a.xi)).unwrap();
        prop_assert_eq!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn log_magnitude_addition_matches_floats(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let s = LogMagnitude::from_f64(a).add(LogMagnitude::from_f64(b)).to_f64();
        prop_assert!((s - (a + b)).abs() <= 1e-9 * (a.abs() + b.abs()).max(1e-300));
    }

    #[test]
    fn quantile_lies_within_sample_range(v in prop::collection::vec(-1e3f64..1e3, 2..200), q in 0.01f64..0.99) {
        let e = quantile_se(&v, q).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e.value >= lo && e.value <= hi);
    }

    #[test]
    fn decorrelated_step_dominated_when_gradient_is_small(eta in 0.01f64..2.0, b_prev in 0.01f64..10.0, s0 in 0.0f64..3.0, g in 0.0f64..10.0, frac in 0.0f64..1.0) {
        // Whenever ‖g_t‖² ≤ σ0² + ‖∇F‖², the decorrelated step is at most the AdaGrad step.
        let sg = frac * (s0 * s0 + g);
        let tilde = decorrelated_step(eta, b_prev, s0, g);
        let actual = eta / (b_prev + sg).sqrt();
        prop_assert!(tilde <= actual * (1.0 + 1e-15));
    }

    #[test]
    fn compensation_sets_are_disjoint_and_earlier(
        marks in prop::collection::vec(any::<bool>(), 1..120),
        n in 0usize..6,
    ) {
        let bad: Vec<usize> = marks.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect();
        let good: Vec<usize> = marks.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i + 1).collect();
        let sets = compensation_sets(&bad, &good, n);
        let mut seen = std::collections::HashSet::new();
        let mut short = false;
        for (b, set) in &sets {
            prop_assert!(set.len() <= n);
            prop_assert!(!short || set.is_empty());
            short |= set.len() < n;
            for g in set {
                prop_assert!(g < b);
                prop_assert!(seen.insert(*g));
            }
        }
    }

    #[test]
    fn stopping_identities_hold_for_any_delta(delta in 0.05f64..1.0, seed in any::<u64>()) {
        let f = make_quadratic(1.0, vec![0.0]).unwrap();
        let o = make_affine_oracle(0.7, 0.8, 0.0).unwrap();
        let spec = RunSpec { objective: &f, oracle: &o, algorithm: Algorithm::AdagradNorm { eta: 0.5, b0_sq: 1.0 }, tie_break: TieBreak::Plus, horizon: 20 };
        let recs: Vec<_> = (0..100).map(|r| run_trajectory(&spec, &[1.0], &derive_stream(seed, r), None).unwrap()).collect();
        let ens = build_stopping_ensemble(&recs, delta, 0.5, 0.0).unwrap();
        prop_assert_eq!(check_stopping_identities(&ens).total(), 0);
    }
}
