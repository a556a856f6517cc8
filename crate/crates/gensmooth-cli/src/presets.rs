//! Bundled run configurations, one per reproduced claim.

use crate::config::{RunConfig, Study, SCHEMA_VERSION};
use gensmooth::experiments::{
    power_of_two_grid, AdaGradDivergenceConfig, ConvergenceStudyConfig, SimpleDivergenceConfig,
};
use gensmooth::objectives::{log_spaced_curvatures, make_monomial, ObjectiveSpec};
use gensmooth::optimizers::{Algorithm, TieBreak};
use gensmooth::oracles::OracleConfig;

/// Names accepted by `gensmooth run <preset>`.
pub const NAMES: [&str; 5] = [
    "thm41-quadratic",
    "thm41-noiseless",
    "thm44-monomial",
    "appD-normsgd",
    "appD-adagrad",
];

/// Seed stored in every preset.
pub const PRESET_SEED: u64 = 7;

/// Dimension of the ill-conditioned quadratic used by the rate presets.
pub const RATE_DIM: usize = 32;

/// Tolerance `ε′` used to pick the step size of the monomial preset.
pub const MONOMIAL_EPS_PRIME: f64 = 0.2;

/// The ill-conditioned quadratic rate study: curvatures spread over six
/// decades and a start at unit initial value per coordinate.
pub fn quadratic_rate_study(sigma0: f64, sigma1: f64) -> ConvergenceStudyConfig {
    let curvatures = log_spaced_curvatures(RATE_DIM, 1.0, 1e-6);
    let w1 = curvatures.iter().map(|l| 1.0 / l.sqrt()).collect();
    ConvergenceStudyConfig {
        objective: ObjectiveSpec::ScaledQuadratic {
            curvatures,
            minimizer: vec![0.0; RATE_DIM],
        },
        oracle: OracleConfig {
            sigma0,
            sigma1,
            eps: 0.0,
            minibatch_b: 1,
        },
        algorithm: Algorithm::AdagradNorm {
            eta: 1.0,
            b0_sq: 1.0,
        },
        w1,
        horizons: power_of_two_grid(8, 14),
        replicates: 500,
        quantile: 0.75,
    }
}

/// The quartic rate study with `σ1 = 2` and the largest step the
/// polynomially bounded analysis allows, `η = 2ε′/(L1(4 + σ1²))`.
pub fn monomial_rate_study() -> ConvergenceStudyConfig {
    let sigma1 = 2.0;
    let l1 = make_monomial(4, 1.0, vec![0.0])
        .expect("valid monomial")
        .smoothness
        .l1;
    let eta = 2.0 * MONOMIAL_EPS_PRIME / (l1 * (4.0 + sigma1 * sigma1));
    ConvergenceStudyConfig {
        objective: ObjectiveSpec::Monomial {
            k: 4,
            l1: 1.0,
            minimizer: vec![0.0],
        },
        oracle: OracleConfig {
            sigma0: 1.0,
            sigma1,
            eps: 0.0,
            minibatch_b: 1,
        },
        algorithm: Algorithm::AdagradNorm { eta, b0_sq: 1.0 },
        w1: vec![1.0],
        horizons: power_of_two_grid(8, 14),
        replicates: 500,
        quantile: 0.75,
    }
}

/// The simple-algorithm divergence construction with `γ = β = 0`.
pub fn simple_divergence_study() -> SimpleDivergenceConfig {
    SimpleDivergenceConfig {
        l0: 1.0,
        gap: 0.5,
        sigma1: 4.0,
        eps: 2f64.sqrt(),
        gamma: 0.0,
        beta: 0.0,
        eta: 0.05,
        horizon: 2000,
        replicates: 2000,
        tie_break: TieBreak::Plus,
    }
}

/// The AdaGrad-Norm divergence construction with `ηL1 = 1/2`.
pub fn adagrad_divergence_study() -> AdaGradDivergenceConfig {
    AdaGradDivergenceConfig {
        l1: 1.0,
        eta: 0.5,
        x1: 0.0,
        horizon: 512,
        replicates: 2000,
        delta_target: 0.25,
        sigma1: None,
        eps: None,
        b0_sq: None,
    }
}

/// Look up a bundled preset by name.
pub fn preset(name: &str) -> Option<RunConfig> {
    let study = match name {
        "thm41-quadratic" => Study::Convergence(quadratic_rate_study(1.0, 0.5)),
        "thm41-noiseless" => Study::Convergence(quadratic_rate_study(0.0, 0.0)),
        "thm44-monomial" => Study::Convergence(monomial_rate_study()),
        "appD-normsgd" => Study::SimpleDivergence(simple_divergence_study()),
        "appD-adagrad" => Study::AdagradDivergence(adagrad_divergence_study()),
        _ => return None,
    };
    Some(RunConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        master_seed: Some(PRESET_SEED),
        output_dir: None,
        formats: None,
        study,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_step_matches_closed_form() {
        let Algorithm::AdagradNorm { eta, .. } = monomial_rate_study().algorithm else {
            panic!("expected AdaGrad-Norm");
        };
        let l1 = 3.0 * (std::f64::consts::E - 1.0);
        assert!((eta - 0.4 / (8.0 * l1)).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset("thm99").is_none());
    }
}
