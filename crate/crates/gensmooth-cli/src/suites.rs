//! Verification suites run by `gensmooth verify`.

use crate::commands::certify_claims;
use crate::config::{CertifyConfig, SCHEMA_VERSION};
use crate::presets;
use crate::CliError;
use gensmooth::experiments::{
    run_adagrad_divergence, run_convergence_study, run_simple_alg_divergence,
    AdaGradDivergenceConfig, ConvergenceStudyConfig, SimpleDivergenceConfig,
};
use gensmooth::instrumentation::{
    bad_set_moment_report, build_stopping_ensemble, check_measurability, check_stopping_identities,
    check_stopping_step_lower_bound, classify_good_times, compensation_ledger, default_delta,
    half_ensemble_agreement, GoodTimeParams, StepBoundInputs,
};
use gensmooth::numerics::{derive_stream, RunningMoments, SUBSTREAM_SETUP};
use gensmooth::objectives::{
    check_growth_envelope, check_local_descent, log_spaced_curvatures, Objective, ObjectiveSpec,
};
use gensmooth::optimizers::{
    bounded_step_violations, log_sum_margin, one_step_gradient_violations, run_trajectory,
    Algorithm, RunSpec, TieBreak, TrajectoryRecord,
};
use gensmooth::oracles::{make_affine_oracle, OracleRngs};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Suites accepted by `gensmooth verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Oracle,
    AuxFacts,
    Certification,
    Stopping,
    Moments,
    Coupling,
    Rates,
    AdagradDivergence,
    All,
}

impl Suite {
    /// The suites run by `all`, in order.
    pub const EACH: [Suite; 8] = [
        Suite::Oracle,
        Suite::AuxFacts,
        Suite::Certification,
        Suite::Stopping,
        Suite::Moments,
        Suite::Coupling,
        Suite::Rates,
        Suite::AdagradDivergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::AuxFacts => "aux-facts",
            Suite::Certification => "certification",
            Suite::Stopping => "stopping",
            Suite::Moments => "moments",
            Suite::Coupling => "coupling",
            Suite::Rates => "rates",
            Suite::AdagradDivergence => "adagrad-divergence",
            Suite::All => "all",
        }
    }
}

/// One assertion with its observed value and the limit it was held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn new(
        name: impl Into<String>,
        pass: bool,
        observed: f64,
        limit: f64,
        detail: impl Into<String>,
    ) -> Self {
        Check {
            name: name.into(),
            pass,
            observed,
            limit,
            detail: detail.into(),
        }
    }

    /// A violation count that must be zero.
    fn zero(name: impl Into<String>, count: usize, detail: impl Into<String>) -> Self {
        Check::new(name, count == 0, count as f64, 0.0, detail)
    }
}

/// All checks of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        SuiteReport {
            suite: suite.name().to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

/// Parameters of the oracle moment suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSuite {
    pub configurations: usize,
    pub draws: usize,
    pub dim: usize,
    /// Allowed deviation in standard errors.
    pub k_se: f64,
}

impl Default for OracleSuite {
    fn default() -> Self {
        OracleSuite {
            configurations: 20,
            draws: 1_000_000,
            dim: 3,
            k_se: 4.0,
        }
    }
}

/// One zoo member of the auxiliary-fact suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxMember {
    pub objective: ObjectiveSpec,
    pub eta: f64,
    pub w1: Vec<f64>,
}

/// Parameters of the auxiliary-fact suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxFactsSuite {
    pub members: Vec<AuxMember>,
    pub trajectories_per_member: usize,
    pub horizon: usize,
    pub sigma0: f64,
    pub sigma1: f64,
    pub b0_sq: f64,
}

impl Default for AuxFactsSuite {
    fn default() -> Self {
        let member = |objective, eta, w1| AuxMember { objective, eta, w1 };
        let curvatures = log_spaced_curvatures(8, 1.0, 1e-3);
        AuxFactsSuite {
            members: vec![
                member(
                    ObjectiveSpec::Quadratic {
                        l0: 1.0,
                        minimizer: vec![0.0; 4],
                    },
                    0.5,
                    vec![1.0, -2.0, 0.5, 3.0],
                ),
                member(
                    ObjectiveSpec::Monomial {
                        k: 4,
                        l1: 1.0,
                        minimizer: vec![0.0],
                    },
                    0.15,
                    vec![1.0],
                ),
                member(
                    ObjectiveSpec::CompositeGrowth { l0: 1.0, l1: 1.0 },
                    0.2,
                    vec![1.0],
                ),
                member(ObjectiveSpec::Exponential { l1: 1.0 }, 0.5, vec![0.0]),
                member(
                    ObjectiveSpec::ScaledQuadratic {
                        curvatures,
                        minimizer: vec![0.0; 8],
                    },
                    1.0,
                    vec![2.0; 8],
                ),
            ],
            trajectories_per_member: 200,
            horizon: 256,
            sigma0: 0.5,
            sigma1: 0.5,
            b0_sq: 1.0,
        }
    }
}

/// Parameters shared by the stopping-time and bad-set suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSuite {
    pub l0: f64,
    pub w1: f64,
    pub eta: f64,
    pub b0_sq: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub eps: f64,
    pub trajectories: usize,
    pub horizon: usize,
    /// Failure probability `δ′`; the stopping parameter is `δ = δ′/(4T)`.
    pub delta_prime: f64,
    pub good_time_eps: f64,
}

impl EnsembleSuite {
    fn stopping() -> Self {
        EnsembleSuite {
            l0: 1.0,
            w1: 1.0,
            eta: 0.5,
            b0_sq: 1.0,
            sigma0: 1.0,
            sigma1: 0.5,
            eps: 0.0,
            trajectories: 1000,
            horizon: 256,
            delta_prime: 0.25,
            good_time_eps: 0.1,
        }
    }

    fn moments() -> Self {
        EnsembleSuite {
            sigma0: 0.0,
            sigma1: 2.0,
            ..EnsembleSuite::stopping()
        }
    }
}

impl Default for EnsembleSuite {
    fn default() -> Self {
        EnsembleSuite::stopping()
    }
}

fn default_moments() -> EnsembleSuite {
    EnsembleSuite::moments()
}

/// A rate study with its acceptance window for the fitted slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCheck {
    pub name: String,
    pub study: ConvergenceStudyConfig,
    pub window: [f64; 2],
}

fn default_rates() -> Vec<RateCheck> {
    vec![
        RateCheck {
            name: "thm41-quadratic".into(),
            study: presets::quadratic_rate_study(1.0, 0.5),
            window: [-0.75, -0.35],
        },
        RateCheck {
            name: "thm41-noiseless".into(),
            study: presets::quadratic_rate_study(0.0, 0.0),
            window: [-1.3, -0.8],
        },
        RateCheck {
            name: "thm44-monomial".into(),
            study: presets::monomial_rate_study(),
            window: [-0.75, -0.35],
        },
    ]
}

fn schema() -> u32 {
    SCHEMA_VERSION
}

/// Configuration accepted by `gensmooth verify --config`. Every section
/// defaults to the acceptance setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub oracle: OracleSuite,
    #[serde(default)]
    pub aux_facts: AuxFactsSuite,
    #[serde(default)]
    pub certification: CertifyConfig,
    #[serde(default)]
    pub stopping: EnsembleSuite,
    #[serde(default = "default_moments")]
    pub moments: EnsembleSuite,
    #[serde(default = "presets::simple_divergence_study")]
    pub coupling: SimpleDivergenceConfig,
    #[serde(default = "default_rates")]
    pub rates: Vec<RateCheck>,
    #[serde(default = "presets::adagrad_divergence_study")]
    pub adagrad_divergence: AdaGradDivergenceConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            schema_version: SCHEMA_VERSION,
            master_seed: None,
            oracle: OracleSuite::default(),
            aux_facts: AuxFactsSuite::default(),
            certification: CertifyConfig::default(),
            stopping: EnsembleSuite::stopping(),
            moments: EnsembleSuite::moments(),
            coupling: presets::simple_divergence_study(),
            rates: default_rates(),
            adagrad_divergence: presets::adagrad_divergence_study(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.oracle.draws < 2 || self.oracle.dim == 0 {
            return Err(CliError::Config(
                "oracle suite needs draws >= 2 and dim >= 1".into(),
            ));
        }
        // The stopping suite also compares two half-ensembles.
        let min = gensmooth::instrumentation::MIN_ENSEMBLE;
        if self.stopping.trajectories < 2 * min || self.moments.trajectories < min {
            return Err(CliError::Config(format!(
                "stopping suite needs at least {} trajectories and moments suite at least {min}",
                2 * min
            )));
        }
        self.certification.validate()?;
        self.coupling.validate().map_err(CliError::config)?;
        for r in &self.rates {
            r.study.validate().map_err(CliError::config)?;
        }
        self.adagrad_divergence
            .constants()
            .map_err(CliError::config)?;
        Ok(())
    }
}

/// Run one suite, or every suite for [`Suite::All`].
pub fn run_suite(
    suite: Suite,
    cfg: &VerifyConfig,
    seed: u64,
) -> Result<Vec<SuiteReport>, CliError> {
    if suite == Suite::All {
        return Suite::EACH.iter().map(|&s| run_one(s, cfg, seed)).collect();
    }
    Ok(vec![run_one(suite, cfg, seed)?])
}

fn run_one(suite: Suite, cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport, CliError> {
    let checks = match suite {
        Suite::Oracle => oracle_checks(&cfg.oracle, seed)?,
        Suite::AuxFacts => aux_fact_checks(&cfg.aux_facts, seed)?,
        Suite::Certification => certification_checks(&cfg.certification, seed)?,
        Suite::Stopping => stopping_checks(&cfg.stopping, seed)?,
        Suite::Moments => moment_checks(&cfg.moments, seed)?,
        Suite::Coupling => coupling_checks(&cfg.coupling, seed)?,
        Suite::Rates => rate_checks(&cfg.rates, seed)?,
        Suite::AdagradDivergence => adagrad_checks(&cfg.adagrad_divergence, seed)?,
        Suite::All => unreachable!("expanded by run_suite"),
    };
    Ok(SuiteReport::new(suite, checks))
}

/// Sample mean of `g` against `∇F`, and of `‖g − ∇F‖²` against
/// `σ0² + σ1²‖∇F‖²`, for random oracle configurations.
fn oracle_checks(p: &OracleSuite, seed: u64) -> Result<Vec<Check>, CliError> {
    let per_config: Vec<Vec<Check>> = (0..p.configurations)
        .into_par_iter()
        .map(|i| {
            let mut setup = derive_stream(seed, i as u64).rng(SUBSTREAM_SETUP);
            let sigma0 = setup.random_range(0.0..2.0);
            let sigma1 = setup.random_range(0.0..4.0);
            let eps = setup.random_range(0.0..2.0);
            let norm = setup.random_range(0.1..3.0);
            let mut dir: Vec<f64> = (0..p.dim).map(|_| setup.random_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|x| *x *= norm / n);
            let grad = dir;
            let oracle = make_affine_oracle(sigma0, sigma1, eps).map_err(CliError::config)?;
            let mut rngs = OracleRngs::new(&derive_stream(seed, (1 << 40) | i as u64));
            let mut comps = vec![RunningMoments::new(); p.dim];
            let mut dev = RunningMoments::new();
            for _ in 0..p.draws {
                let (g, _) = oracle.sample(&grad, &mut rngs, None);
                let mut sq = 0.0;
                for ((m, gi), fi) in comps.iter_mut().zip(&g).zip(&grad) {
                    m.push(*gi);
                    sq += (gi - fi) * (gi - fi);
                }
                dev.push(sq);
            }
            let label = format!("config {i}: sigma0 = {sigma0:.4}, sigma1 = {sigma1:.4}, eps = {eps:.4}, |grad| = {norm:.4}");
            let mut worst_z: f64 = 0.0;
            for (m, fi) in comps.iter().zip(&grad) {
                worst_z = worst_z.max(z_score(m.estimate().value - fi, m.estimate().se));
            }
            let target = sigma0 * sigma0 + sigma1 * sigma1 * norm * norm;
            let d = dev.estimate();
            let var_z = z_score(d.value - target, d.se);
            Ok(vec![
                Check::new(format!("unbiased, {label}"), worst_z <= p.k_se, worst_z, p.k_se, "largest |mean(g_i) - grad_i| / SE"),
                Check::new(format!("affine variance, {label}"), var_z <= p.k_se, var_z, p.k_se, format!("mean |g - grad|^2 = {} vs {target}", d.value)),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    Ok(per_config.into_iter().flatten().collect())
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn aux_fact_checks(p: &AuxFactsSuite, seed: u64) -> Result<Vec<Check>, CliError> {
    let oracle = make_affine_oracle(p.sigma0, p.sigma1, 0.0).map_err(CliError::config)?;
    let mut checks = Vec::new();
    for (m, member) in p.members.iter().enumerate() {
        let obj = Objective::from_spec(&member.objective).map_err(CliError::config)?;
        let spec = RunSpec {
            objective: &obj,
            oracle: &oracle,
            algorithm: Algorithm::AdagradNorm {
                eta: member.eta,
                b0_sq: p.b0_sq,
            },
            tie_break: TieBreak::Plus,
            horizon: p.horizon,
        };
        let l0 = obj.smoothness.l0;
        let l1 = obj.smoothness.l1;
        let counts: Vec<[usize; 5]> = (0..p.trajectories_per_member)
            .into_par_iter()
            .map(|r| {
                let stream = derive_stream(seed, ((m as u64) << 32) | r as u64);
                let rec =
                    run_trajectory(&spec, &member.w1, &stream, None).map_err(CliError::failure)?;
                let log_sum = usize::from(log_sum_margin(&rec).map_or(true, |v| v < -1e-9));
                let growth =
                    check_growth_envelope(&rec, l0, l1, member.eta).map_err(CliError::config)?;
                Ok([
                    log_sum,
                    bounded_step_violations(&rec),
                    one_step_gradient_violations(&rec, l0, l1),
                    local_descent_violations(&obj, &rec),
                    usize::from(!growth),
                ])
            })
            .collect::<Result<_, CliError>>()?;
        let total = |j: usize| counts.iter().map(|c| c[j]).sum::<usize>();
        let name = obj.name();
        let n = p.trajectories_per_member;
        checks.push(Check::zero(
            format!("log-sum inequality, {name}"),
            total(0),
            format!("{n} trajectories"),
        ));
        checks.push(Check::zero(
            format!("bounded steps, {name}"),
            total(1),
            "steps longer than eta + 1e-12",
        ));
        checks.push(Check::zero(
            format!("one-step gradient bound, {name}"),
            total(2),
            "violating steps",
        ));
        checks.push(Check::zero(
            format!("local descent inequality, {name}"),
            total(3),
            "violating steps",
        ));
        checks.push(Check::zero(
            format!("growth envelope, {name}"),
            total(4),
            "violating trajectories",
        ));
    }
    Ok(checks)
}

fn local_descent_violations(obj: &Objective, rec: &TrajectoryRecord) -> usize {
    (0..rec.len())
        .filter(|&t| {
            let w = rec.iterate(t);
            let d: Vec<f64> = rec
                .iterate(t + 1)
                .iter()
                .zip(w)
                .map(|(a, b)| a - b)
                .collect();
            !check_local_descent(obj, w, &d)
        })
        .count()
}

fn certification_checks(cfg: &CertifyConfig, seed: u64) -> Result<Vec<Check>, CliError> {
    let outcomes = certify_claims(cfg, seed)?;
    Ok(outcomes
        .iter()
        .map(|o| {
            let witnesses = o.reports.iter().filter(|r| r.witness.is_some()).count();
            Check::new(
                o.label.clone(),
                o.matched,
                witnesses as f64,
                o.reports.len() as f64,
                format!(
                    "expected {:?}; observed value counts reports with a witness",
                    o.expect
                ),
            )
        })
        .collect())
}

fn ensemble(
    p: &EnsembleSuite,
    seed: u64,
) -> Result<
    (
        Objective,
        gensmooth::oracles::AffineOracle,
        Vec<TrajectoryRecord>,
    ),
    CliError,
> {
    if p.trajectories < gensmooth::instrumentation::MIN_ENSEMBLE {
        return Err(CliError::Config(format!(
            "ensemble suites need at least {} trajectories",
            gensmooth::instrumentation::MIN_ENSEMBLE
        )));
    }
    let obj = gensmooth::objectives::make_quadratic(p.l0, vec![0.0]).map_err(CliError::config)?;
    let oracle = make_affine_oracle(p.sigma0, p.sigma1, p.eps).map_err(CliError::config)?;
    let spec = RunSpec {
        objective: &obj,
        oracle: &oracle,
        algorithm: Algorithm::AdagradNorm {
            eta: p.eta,
            b0_sq: p.b0_sq,
        },
        tie_break: TieBreak::Plus,
        horizon: p.horizon,
    };
    let records = (0..p.trajectories as u64)
        .into_par_iter()
        .map(|r| run_trajectory(&spec, &[p.w1], &derive_stream(seed, r), None))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::failure)?;
    Ok((obj, oracle, records))
}

fn stopping_checks(p: &EnsembleSuite, seed: u64) -> Result<Vec<Check>, CliError> {
    let (_, _, records) = ensemble(p, seed)?;
    let delta = default_delta(p.delta_prime, p.horizon);
    let ens = build_stopping_ensemble(&records, delta, p.eta, 0.0).map_err(CliError::config)?;
    let v = check_stopping_identities(&ens);
    let meas = check_measurability(&records, &ens);
    let tau = ens.mean_tau();
    let lb = ens.mean_tau_lower_bound();
    let inputs = StepBoundInputs {
        b0_sq: p.b0_sq,
        l0: p.l0,
        sigma0: p.sigma0,
        sigma1: p.sigma1,
    };
    let step =
        check_stopping_step_lower_bound(&records, &ens, &inputs).map_err(CliError::config)?;
    let z = half_ensemble_agreement(&records, delta, p.eta, 0.0).map_err(CliError::config)?;
    Ok(vec![
        Check::zero(
            "monotonicity",
            v.monotonicity,
            "breaches of tau, S, X monotonicity",
        ),
        Check::zero("range", v.range, "paths with tau outside [2, T+1]"),
        Check::zero(
            "initial values",
            v.initial,
            "paths with wrong tau_1, S_1, X_1, tau_2",
        ),
        Check::zero(
            "threshold identity",
            v.threshold,
            "breaches of S <= E[S]/delta at tau - 1",
        ),
        Check::zero(
            "nesting identity",
            v.nesting,
            "breaches of tau_{tau_t - 1} = tau_t - 1",
        ),
        Check::zero(
            "measurability",
            v.measurability + meas,
            "X_t disagreeing with a recomputation from the past",
        ),
        Check::new(
            "mean stopping time",
            tau.at_least(lb, 3.0),
            tau.value,
            lb,
            format!(
                "mean tau_(T+1) = {} +- {}, needs >= bound - 3 SE",
                tau.value, tau.se
            ),
        ),
        Check::zero(
            "step-size lower bound",
            step.violations,
            format!(
                "bound {} over {} steps, smallest ratio {}",
                step.bound, step.checked, step.min_ratio
            ),
        ),
        Check::new(
            "half-ensemble agreement",
            z <= 5.0,
            z,
            5.0,
            "largest z between half-ensemble E[S_t] estimates",
        ),
    ])
}

fn moment_checks(p: &EnsembleSuite, seed: u64) -> Result<Vec<Check>, CliError> {
    let (obj, oracle, records) = ensemble(p, seed)?;
    let delta = default_delta(p.delta_prime, p.horizon);
    let ens = build_stopping_ensemble(&records, delta, p.eta, obj.smoothness.l1)
        .map_err(CliError::config)?;
    let params = GoodTimeParams::uniform(p.good_time_eps);
    let labels = records
        .par_iter()
        .map(|r| classify_good_times(r, &oracle, &params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::config)?;
    let mut checks = Vec::new();
    for k in [1, 2] {
        let m = bad_set_moment_report(&records, &ens, &labels, &params, &oracle, k)
            .map_err(CliError::config)?;
        checks.push(Check::new(
            format!("bad-set moment k = {k}"),
            m.pass,
            m.empirical.value,
            m.bound,
            format!(
                "E|S^c|^{k} = {} +- {}, f = {}",
                m.empirical.value, m.empirical.se, m.f
            ),
        ));
    }
    let c = compensation_ledger(&obj, &oracle, &records, &ens, &labels, &params)
        .map_err(CliError::config)?;
    checks.push(Check::new(
        "compensated bad steps",
        c.pass,
        c.mean_ledger.value,
        c.bound,
        format!(
            "{} compensating good steps per bad step, mean ledger {} +- {}",
            c.n_comp, c.mean_ledger.value, c.mean_ledger.se
        ),
    ));
    Ok(checks)
}

fn coupling_checks(cfg: &SimpleDivergenceConfig, seed: u64) -> Result<Vec<Check>, CliError> {
    let r = run_simple_alg_divergence(cfg, seed).map_err(CliError::from_experiment)?;
    let mut checks: Vec<Check> = r
        .failures
        .iter()
        .map(|f| {
            Check::new(
                format!("failure probability, {}", f.algorithm),
                f.pass,
                f.empirical.value,
                f.bound,
                format!(
                    "empirical {} +- {}, t0 = {}, delta = {}",
                    f.empirical.value, f.empirical.se, f.t0, f.delta
                ),
            )
        })
        .collect();
    checks.push(Check::zero(
        "coupling order",
        r.coupling.coupling_violations,
        format!("{} paths", r.coupling.paths),
    ));
    checks.push(Check::zero(
        "sign bad steps",
        r.coupling.bad_step_violations,
        "violating steps",
    ));
    checks.push(Check::zero(
        "pre-escape conditions",
        r.coupling.pre_escape_violations,
        "violating steps",
    ));
    Ok(checks)
}

fn rate_checks(rates: &[RateCheck], seed: u64) -> Result<Vec<Check>, CliError> {
    rates
        .iter()
        .map(|r| {
            let table = run_convergence_study(&r.study, seed).map_err(CliError::from_experiment)?;
            let s = table.slope();
            let [lo, hi] = r.window;
            Ok(Check::new(
                format!("log-log slope, {}", r.name),
                (lo..=hi).contains(&s),
                s,
                lo,
                format!("window [{lo}, {hi}], fit residual {}", table.fit.residual),
            ))
        })
        .collect()
}

fn adagrad_checks(cfg: &AdaGradDivergenceConfig, seed: u64) -> Result<Vec<Check>, CliError> {
    let r = run_adagrad_divergence(cfg, seed).map_err(CliError::from_experiment)?;
    let target = 1.0 - cfg.delta_target;
    let e = r.failure.empirical;
    Ok(vec![
        Check::new(
            "failure frequency at the sigma1 threshold",
            r.meets_target,
            e.value,
            target,
            format!(
                "empirical {} +- {}, sigma1 = {}",
                e.value, e.se, r.constants.sigma1
            ),
        ),
        Check::new(
            "failure frequency against the analytic bound",
            r.failure.pass,
            e.value,
            r.failure.bound,
            format!("t0 = {}, delta = {}", r.failure.t0, r.failure.delta),
        ),
    ])
}
