use gensmooth::instrumentation::*;
use gensmooth::numerics::derive_stream;
use gensmooth::objectives::make_quadratic;
use gensmooth::optimizers::{run_trajectory, Algorithm, RunSpec, TieBreak, TrajectoryRecord};
use gensmooth::oracles::make_affine_oracle;

fn ensemble(sigma0: f64, sigma1: f64, n: usize, horizon: usize) -> Vec<TrajectoryRecord> {
    let f = make_quadratic(1.0, vec![0.0, 0.0]).unwrap();
    let o = make_affine_oracle(sigma0, sigma1, 0.0).unwrap();
    let spec = RunSpec {
        objective: &f,
        oracle: &o,
        algorithm: Algorithm::AdagradNorm {
            eta: 0.5,
            b0_sq: 1.0,
        },
        tie_break: TieBreak::Plus,
        horizon,
    };
    (0..n as u64)
        .map(|r| run_trajectory(&spec, &[1.0, -2.0], &derive_stream(5, r), None).unwrap())
        .collect()
}

#[test]
fn delta_one_stops_some_paths_and_keeps_identities() {
    let recs = ensemble(0.5, 0.5, 200, 40);
    let ens = build_stopping_ensemble(&recs, 1.0, 0.5, 0.0).unwrap();
    assert!(ens.paths.iter().any(|p| p.tau_final() < 41));
    assert_eq!(check_stopping_identities(&ens).total(), 0);
    assert_eq!(check_measurability(&recs, &ens), 0);
    let inputs = StepBoundInputs {
        b0_sq: 1.0,
        l0: 1.0,
        sigma0: 0.5,
        sigma1: 0.5,
    };
    assert_eq!(
        check_stopping_step_lower_bound(&recs, &ens, &inputs)
            .unwrap()
            .violations,
        0
    );
}

#[test]
fn noiseless_ensemble_never_stops() {
    let recs = ensemble(0.0, 0.0, 100, 30);
    let ens = build_stopping_ensemble(&recs, 0.5, 0.5, 0.0).unwrap();
    assert!(ens.paths.iter().all(|p| p.tau_final() == 31));
    let inputs = StepBoundInputs {
        b0_sq: 1.0,
        l0: 1.0,
        sigma0: 0.0,
        sigma1: 0.0,
    };
    assert_eq!(
        check_stopping_step_lower_bound(&recs, &ens, &inputs)
            .unwrap()
            .violations,
        0
    );
}

#[test]
fn mislabeled_stopping_time_is_detected() {
    let mut recs = ensemble(0.5, 0.5, 200, 40);
    let mut ens = build_stopping_ensemble(&recs, 1.0, 0.5, 0.0).unwrap();
    let p = ens
        .paths
        .iter()
        .position(|p| p.tau_final() < 41)
        .expect("some path stops");
    let tau = ens.paths[p].tau_final();
    // Shift τ_{T+1} by one and plant a huge gradient at the newly included step.
    *ens.paths[p].tau.last_mut().unwrap() = tau + 1;
    recs[p].grad_norm_sq[tau - 1] = 1e12;
    assert!(check_stopping_identities(&ens).threshold > 0);
    let inputs = StepBoundInputs {
        b0_sq: 1.0,
        l0: 1.0,
        sigma0: 0.5,
        sigma1: 0.5,
    };
    assert!(
        check_stopping_step_lower_bound(&recs, &ens, &inputs)
            .unwrap()
            .violations
            > 0
    );
}

#[test]
fn small_delta_meets_mean_stopping_bound() {
    let recs = ensemble(1.0, 0.5, 300, 64);
    let delta = default_delta(0.25, 64);
    let ens = build_stopping_ensemble(&recs, delta, 0.5, 0.0).unwrap();
    assert!(ens.mean_tau().at_least(ens.mean_tau_lower_bound(), 3.0));
    assert!(half_ensemble_agreement(&recs, delta, 0.5, 0.0).unwrap() <= 5.0);
}

#[test]
fn rejects_bad_inputs() {
    let recs = ensemble(0.5, 0.5, 100, 10);
    assert!(build_stopping_ensemble(&recs, 0.0, 0.5, 0.0).is_err());
    assert!(build_stopping_ensemble(&recs, 1.5, 0.5, 0.0).is_err());
    assert!(build_stopping_ensemble(&recs[..50], 0.5, 0.5, 0.0).is_err());
}

#[test]
fn all_good_regime_has_empty_bad_sets() {
    let recs = ensemble(0.5, 0.5, 100, 30);
    let o = make_affine_oracle(0.5, 0.5, 0.0).unwrap();
    let p = GoodTimeParams::uniform(0.1);
    let labels: Vec<_> = recs
        .iter()
        .map(|r| classify_good_times(r, &o, &p).unwrap())
        .collect();
    assert!(labels.iter().all(|l| l.bad.is_empty()));
    let ens = build_stopping_ensemble(&recs, 0.1, 0.5, 0.0).unwrap();
    let m = bad_set_moment_report(&recs, &ens, &labels, &p, &o, 2).unwrap();
    assert_eq!(m.empirical.value, 0.0);
    assert!(m.pass);
    let f = make_quadratic(1.0, vec![0.0, 0.0]).unwrap();
    let c = compensation_ledger(&f, &o, &recs, &ens, &labels, &p).unwrap();
    assert_eq!(c.n_comp, 0);
    assert!(c.ledger.iter().all(|&v| v <= 0.0));
}

#[test]
fn compensation_requires_poly_certificate() {
    let recs = ensemble(0.5, 0.5, 100, 10);
    let o = make_affine_oracle(0.5, 0.5, 0.0).unwrap();
    let p = GoodTimeParams::uniform(0.1);
    let labels: Vec<_> = recs
        .iter()
        .map(|r| classify_good_times(r, &o, &p).unwrap())
        .collect();
    let ens = build_stopping_ensemble(&recs, 0.1, 0.5, 0.0).unwrap();
    let e = gensmooth::objectives::make_exponential(1.0).unwrap();
    assert!(matches!(
        compensation_ledger(&e, &o, &recs, &ens, &labels, &p),
        Err(InstrumentationError::UnsupportedObjective(_))
    ));
}

#[test]
fn decorrelated_step_is_unbiased_and_adaptive_step_is_not() {
    let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
    let r = decorrelation_check(&o, &[1.0], 1.0, 1.0, 100_000, &derive_stream(3, 3));
    assert!(r.decorrelated_unbiased(4.0));
    assert!(r.adaptive_biased(4.0));
}
