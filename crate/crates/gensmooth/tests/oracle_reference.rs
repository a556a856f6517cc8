//! Oracle values checked against independently computed references.
//!
//! The quadrature references were computed with 30-digit adaptive
//! integration and are frozen here.

use gensmooth::numerics::{derive_stream, RunningMoments};
use gensmooth::oracles::{
    conditional_second_moment_ratio, make_affine_oracle, minibatch_wrap, OracleRngs,
};

#[test]
fn gaussian_ratio_matches_reference() {
    // E[z²/(1+z²)] for z ~ N(0, 1).
    let o = make_affine_oracle(1.0, 0.0, 0.0).unwrap();
    let r = conditional_second_moment_ratio(&o, 0.0, 1.0, 1);
    assert!(
        (r.value - 0.344_320_457_581_201_5).abs() < 1e-10,
        "{}",
        r.value
    );
}

#[test]
fn mixed_noise_ratio_matches_reference() {
    // σ0 = 0.5, σ1 = 2, ε = 0.3, ‖∇F‖² = 2.25, b² = 0.7.
    let o = make_affine_oracle(0.5, 2.0, 0.3).unwrap();
    let r = conditional_second_moment_ratio(&o, 2.25, 0.7, 1);
    assert!(
        (r.value - 0.495_285_245_037_421_8).abs() < 1e-10,
        "{}",
        r.value
    );
}

#[test]
fn exact_ratio_for_pure_multiplicative_noise() {
    let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
    let r = conditional_second_moment_ratio(&o, 1.0, 1.0, 1);
    assert_eq!(r.se, 0.0);
    assert!((r.value - 5.0 / 26.0).abs() < 1e-15);
}

#[test]
fn high_dimensional_ratio_matches_direct_sampling() {
    let o = make_affine_oracle(0.8, 1.5, 0.2).unwrap();
    let grad = [0.3, -0.4, 0.5, 0.1];
    let gns: f64 = grad.iter().map(|x| x * x).sum();
    let b_prev = 0.6;
    let inner = conditional_second_moment_ratio(&o, gns, b_prev, grad.len());
    let mut rngs = OracleRngs::new(&derive_stream(99, 0));
    let mut direct = RunningMoments::new();
    for _ in 0..200_000 {
        let (g, _) = o.sample(&grad, &mut rngs, None);
        let q: f64 = g.iter().map(|x| x * x).sum();
        direct.push(q / (b_prev + q));
    }
    let d = direct.estimate();
    let se = d.se.hypot(inner.se);
    assert!(
        (d.value - inner.value).abs() < 4.0 * se,
        "{} vs {}",
        d.value,
        inner.value
    );
}

#[test]
fn factor_distribution_is_unbiased_with_variance_sigma1_sq() {
    for (s1, eps) in [(0.5, 0.0), (2.0, 0.3), (4.0, 2f64.sqrt()), (83.5, 2.02)] {
        let o = make_affine_oracle(0.0, s1, eps).unwrap();
        let d = o.xi_distribution();
        let m1: f64 = d.iter().map(|(x, p)| x * p).sum();
        let m2: f64 = d.iter().map(|(x, p)| x * x * p).sum();
        assert!((m1 - 1.0).abs() < 1e-12, "mean {m1}");
        assert!(
            (m2 - 1.0 - s1 * s1).abs() < 1e-9 * (1.0 + s1 * s1),
            "var {}",
            m2 - 1.0
        );
    }
}

#[test]
fn minibatch_reduces_variance_by_batch_size() {
    let o = minibatch_wrap(make_affine_oracle(0.0, 3.0, 0.5).unwrap(), 36).unwrap();
    let d = o.xi_distribution();
    let m2: f64 = d.iter().map(|(x, p)| x * x * p).sum();
    assert!((m2 - 1.0 - 0.25).abs() < 1e-9);
}
