//! End-to-end studies: convergence-rate scaling and divergence lower bounds.
//!
//! Replicates run in parallel. Replicate `r` at grid index `j` draws from
//! stream `(j << 32) | r` of the master seed, so results do not depend on
//! the thread count.

use crate::numerics::{self, Estimate, LogLogFit, NumericsError, RngStream, SUBSTREAM_XI};
use crate::objectives::{
    make_exponential, make_quadratic, Objective, ObjectiveError, ObjectiveSpec,
};
use crate::optimizers::{simulate, simulate_log, Algorithm, RunError, RunSpec, TieBreak};
use crate::oracles::{make_affine_oracle, AffineOracle, OracleConfig, OracleError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Smallest replicate count accepted by the studies.
pub const MIN_REPLICATES: usize = 100;

/// Errors raised by the studies.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type Result<T> = std::result::Result<T, ExperimentError>;

/// Stream for replicate `r` at grid position `j`.
pub fn replicate_stream(master_seed: u64, j: usize, r: usize) -> RngStream {
    numerics::derive_stream(master_seed, ((j as u64) << 32) | r as u64)
}

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

fn default_quantile() -> f64 {
    0.75
}

/// A convergence-rate study over a geometric grid of horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudyConfig {
    pub objective: ObjectiveSpec,
    pub oracle: OracleConfig,
    pub algorithm: Algorithm,
    pub w1: Vec<f64>,
    pub horizons: Vec<usize>,
    pub replicates: usize,
    /// Reported quantile of `min_t ‖∇F(w_t)‖²`, `1 − δ′`.
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

impl ConvergenceStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return Err(ExperimentError::InvalidConfig(
                "horizons must be nonempty and positive".into(),
            ));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExperimentError::InvalidConfig(
                "horizons must be strictly increasing".into(),
            ));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(ExperimentError::InvalidConfig(format!(
                "replicates must be at least {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(ExperimentError::InvalidConfig(
                "quantile must lie in (0, 1)".into(),
            ));
        }
        self.algorithm.validate()?;
        Ok(())
    }
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub horizon: usize,
    /// Quantile of `min_t ‖∇F(w_t)‖²` over replicates, with its SE.
    pub quantile: Estimate,
    pub mean: Estimate,
}

/// Result of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub q: f64,
    pub rows: Vec<RateRow>,
    pub fit: LogLogFit,
}

impl RateTable {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    /// CSV with columns `T,quantile,quantile_se,mean,mean_se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,quantile,quantile_se,mean,mean_se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.horizon,
                numerics::fmt_float(r.quantile.value),
                numerics::fmt_float(r.quantile.se),
                numerics::fmt_float(r.mean.value),
                numerics::fmt_float(r.mean.se)
            );
        }
        out
    }
}

/// Refuse configurations outside the convergent regimes: `σ1 ≥ 1` needs a
/// polynomial-boundedness certificate, and is always refused for the
/// exponential objective.
pub fn check_convergence_regime(obj: &Objective, oracle: &AffineOracle) -> Result<()> {
    let s1 = oracle.effective_sigma1();
    if s1 < 1.0 {
        return Ok(());
    }
    if matches!(obj.spec, ObjectiveSpec::Exponential { .. }) {
        return Err(ExperimentError::Regime(format!(
            "exponential objective with sigma1 = {s1} >= 1: AdaGrad-Norm diverges with constant probability here (see the AdaGrad divergence study)"
        )));
    }
    if obj.poly.is_none() {
        return Err(ExperimentError::Regime(format!(
            "sigma1 = {s1} >= 1 requires a polynomially bounded objective, {} has no such certificate",
            obj.name()
        )));
    }
    Ok(())
}

/// Final `min_t ‖∇F(w_t)‖²` of one replicate, as a float (log domain for
/// the exponential objective, exponentiated at the end).
fn min_grad_sq(spec: &RunSpec, w1: &[f64], stream: &RngStream) -> Result<f64> {
    let mut best = f64::INFINITY;
    if spec.objective.needs_log_domain() {
        simulate_log(spec, w1[0], stream, None, |v| {
            best = best.min(v.grad.log_sq())
        })?;
        Ok(best.exp())
    } else {
        simulate(spec, w1, stream, None, |v| best = best.min(v.grad_norm_sq))?;
        Ok(best)
    }
}

/// Run every horizon of the grid with `N` replicates and fit the log-log
/// slope of the reported quantile.
pub fn run_convergence_study(cfg: &ConvergenceStudyConfig, master_seed: u64) -> Result<RateTable> {
    cfg.validate()?;
    let obj = Objective::from_spec(&cfg.objective)?;
    let oracle = AffineOracle::from_config(&cfg.oracle)?;
    check_convergence_regime(&obj, &oracle)?;
    if cfg.w1.len() != obj.dim() {
        return Err(ExperimentError::InvalidConfig(format!(
            "w1 has dimension {}, objective has {}",
            cfg.w1.len(),
            obj.dim()
        )));
    }
    let mut rows = Vec::with_capacity(cfg.horizons.len());
    for (j, &horizon) in cfg.horizons.iter().enumerate() {
        let spec = RunSpec {
            objective: &obj,
            oracle: &oracle,
            algorithm: cfg.algorithm,
            tie_break: TieBreak::Plus,
            horizon,
        };
        let mins: Vec<f64> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| min_grad_sq(&spec, &cfg.w1, &replicate_stream(master_seed, j, r)))
            .collect::<Result<_>>()?;
        rows.push(RateRow {
            horizon,
            quantile: numerics::quantile_se(&mins, cfg.quantile)?,
            mean: numerics::mean_se(&mins),
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.horizon as f64, r.quantile.value))
        .collect();
    let fit = numerics::fit_loglog_slope(&points)?;
    Ok(RateTable {
        q: cfg.quantile,
        rows,
        fit,
    })
}

/// Geometric grid `2^lo, …, 2^hi`.
pub fn power_of_two_grid(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|p| 1usize << p).collect()
}

// ---------------------------------------------------------------------------
// Simple-algorithm divergence
// ---------------------------------------------------------------------------

/// Divergence construction for normalized, clipped, and sign SGD on
/// `F(x) = (L0/2)x²` started at `x1 = −√(2Δ/L0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleDivergenceConfig {
    pub l0: f64,
    /// Initial gap `Δ = F(x1) − F*`.
    pub gap: f64,
    pub sigma1: f64,
    pub eps: f64,
    pub gamma: f64,
    pub beta: f64,
    pub eta: f64,
    pub horizon: usize,
    pub replicates: usize,
    #[serde(default)]
    pub tie_break: TieBreak,
}

/// Constants derived from a [`SimpleDivergenceConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleDivergenceConstants {
    pub x1: f64,
    /// `1/λ_clip = 1 + γ/(ε√(2ΔL0))`.
    pub lambda_clip: f64,
    /// `δ = 1/(1 + σ1²/(1+ε)²)`.
    pub delta: f64,
    /// `δ0 = 1/(1 + 1/λ_clip)`.
    pub delta0: f64,
    pub t0: f64,
    /// `(1 − δ)^{t0+1}`.
    pub bound: f64,
    /// Largest admissible momentum, `ε/(2(1+ε+σ1²/(1+ε)))`.
    pub beta_max: f64,
}

/// `t0 = ⌈√(2δ(1−δ)log(1+2/δ))/δ0 · (1 + 2δ(1−δ)/(δ−δ0)² · log(4(1−δ)/(δ0−δ)²))⌉`.
///
/// ```
/// use gensmooth::experiments::simple_divergence_t0;
///
/// let delta = 1.0 / (1.0 + 16.0 / (1.0 + 2f64.sqrt()).powi(2));
/// assert_eq!(simple_divergence_t0(delta, 0.5), 55.0);
/// ```
pub fn simple_divergence_t0(delta: f64, delta0: f64) -> f64 {
    let v = delta * (1.0 - delta);
    let gap_sq = (delta - delta0) * (delta - delta0);
    let lead = (2.0 * v * (1.0 + 2.0 / delta).ln()).sqrt() / delta0;
    (lead * (1.0 + 2.0 * v / gap_sq * (4.0 * (1.0 - delta) / gap_sq).ln())).ceil()
}

impl SimpleDivergenceConfig {
    pub fn constants(&self) -> SimpleDivergenceConstants {
        let scale = self.eps * (2.0 * self.gap * self.l0).sqrt();
        let lambda_clip = 1.0 / (1.0 + self.gamma / scale);
        let delta = 1.0 / (1.0 + self.sigma1 * self.sigma1 / ((1.0 + self.eps) * (1.0 + self.eps)));
        let delta0 = lambda_clip / (1.0 + lambda_clip);
        let t0 = simple_divergence_t0(delta, delta0);
        SimpleDivergenceConstants {
            x1: -(2.0 * self.gap / self.l0).sqrt(),
            lambda_clip,
            delta,
            delta0,
            t0,
            bound: (1.0 - delta).powf(t0 + 1.0),
            beta_max: self.eps
                / (2.0 * (1.0 + self.eps + self.sigma1 * self.sigma1 / (1.0 + self.eps))),
        }
    }

    /// Check the construction's preconditions, naming the violated inequality.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L0", self.l0),
            ("gap", self.gap),
            ("eps", self.eps),
            ("eta", self.eta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.horizon == 0 || self.replicates < MIN_REPLICATES {
            return Err(ExperimentError::InvalidConfig(format!(
                "need T >= 1 and at least {MIN_REPLICATES} replicates"
            )));
        }
        let scale = self.eps * (2.0 * self.gap * self.l0).sqrt();
        if !(self.gamma >= 0.0 && self.gamma <= scale) {
            return Err(ExperimentError::Precondition(format!(
                "gamma in [0, eps*sqrt(2*gap*L0)] = [0, {scale}] fails for gamma = {}",
                self.gamma
            )));
        }
        let c = self.constants();
        let need = (1.0 + self.gamma / scale) * (1.0 + self.eps) * (1.0 + self.eps);
        if !(self.sigma1 * self.sigma1 > need) {
            return Err(ExperimentError::Precondition(format!(
                "sigma1^2 > (1 + gamma/(eps*sqrt(2*gap*L0)))(1+eps)^2 = {need} fails for sigma1^2 = {}",
                self.sigma1 * self.sigma1
            )));
        }
        if !(self.beta >= 0.0 && self.beta < c.beta_max) {
            return Err(ExperimentError::Precondition(format!(
                "beta < eps/(2(1+eps+sigma1^2/(1+eps))) = {} fails for beta = {}",
                c.beta_max, self.beta
            )));
        }
        Ok(())
    }
}

/// Empirical failure frequency against an analytic lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub algorithm: String,
    /// Frequency of `min_t ‖∇F(x_t)‖² ≥ ‖∇F(x1)‖²`.
    pub empirical: Estimate,
    pub bound: f64,
    pub t0: f64,
    /// Probability of the large multiplicative factor.
    pub delta: f64,
    /// `empirical ≥ bound − 3·SE`.
    pub pass: bool,
}

/// Per-path checks of the four-process coupling.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub paths: usize,
    /// Paths with `τ*(4) > τ*(i)` for some `i`.
    pub coupling_violations: usize,
    /// Steps before `τ*` of the sign method where `ξ = −ε` but `u_t ≠ +η`.
    pub bad_step_violations: usize,
    /// Steps before `τ*` where `x_t ≤ x1`, `|g_t| ≥ γ`, or
    /// `‖∇F(x_t)‖² ≥ ‖∇F(x1)‖²` fails.
    pub pre_escape_violations: usize,
}

impl CouplingReport {
    pub fn total(&self) -> usize {
        self.coupling_violations + self.bad_step_violations + self.pre_escape_violations
    }
}

/// Divergence study output: one report per method plus the coupling checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleDivergenceReport {
    pub constants: SimpleDivergenceConstants,
    pub failures: Vec<FailureReport>,
    pub coupling: CouplingReport,
}

/// The three simple methods in reporting order.
pub fn simple_algorithms(cfg: &SimpleDivergenceConfig) -> [Algorithm; 3] {
    [
        Algorithm::Normalized {
            eta: cfg.eta,
            gamma: cfg.gamma,
        },
        Algorithm::Clipped {
            eta: cfg.eta,
            gamma: cfg.gamma,
        },
        Algorithm::SignMomentum {
            eta: cfg.eta,
            beta: cfg.beta,
        },
    ]
}

#[derive(Debug, Default, Clone, Copy)]
struct PathOutcome {
    failed: [bool; 3],
    coupling_violation: bool,
    bad_steps: usize,
    pre_escape: usize,
}

/// First `t ∈ [2, T]` with `x_t ≥ x1`, or `T + 1`.
fn escape_time(xs: &[f64], x1: f64) -> usize {
    xs.iter()
        .enumerate()
        .skip(1)
        .find(|(_, &x)| x >= x1)
        .map(|(i, _)| i + 1)
        .unwrap_or(xs.len() + 1)
}

fn coupled_path(
    cfg: &SimpleDivergenceConfig,
    c: &SimpleDivergenceConstants,
    obj: &Objective,
    oracle: &AffineOracle,
    stream: &RngStream,
) -> Result<PathOutcome> {
    let xis = oracle.draw_xi_sequence(&mut stream.rng(SUBSTREAM_XI), cfg.horizon);
    let g1_sq = (cfg.l0 * c.x1).powi(2);
    let mut out = PathOutcome::default();
    // Reference process: +λη on ξ = −ε, −η otherwise, with x_{t+1} = x_t − u.
    let mut xs4 = Vec::with_capacity(cfg.horizon);
    let mut x = c.x1;
    for &xi in &xis {
        xs4.push(x);
        x -= if xi < 0.0 {
            c.lambda_clip * cfg.eta
        } else {
            -cfg.eta
        };
    }
    let tau4 = escape_time(&xs4, c.x1);
    for (i, alg) in simple_algorithms(cfg).into_iter().enumerate() {
        let spec = RunSpec {
            objective: obj,
            oracle,
            algorithm: alg,
            tie_break: cfg.tie_break,
            horizon: cfg.horizon,
        };
        let mut xs = Vec::with_capacity(cfg.horizon);
        let mut steps = Vec::with_capacity(cfg.horizon);
        let mut never_improved = true;
        simulate(&spec, &[c.x1], stream, Some(&xis), |v| {
            xs.push(v.w[0]);
            steps.push((v.g[0], v.grad_norm_sq, v.xi, v.w[0] - v.w_next[0]));
            never_improved &= v.grad_norm_sq >= g1_sq;
        })?;
        out.failed[i] = never_improved;
        let tau = escape_time(&xs, c.x1);
        out.coupling_violation |= tau4 > tau;
        for (t, &(g, gns, xi, u)) in steps.iter().enumerate().take(tau - 1) {
            let ok = xs[t] <= c.x1 && g.abs() >= cfg.gamma && gns >= g1_sq;
            out.pre_escape += usize::from(!ok);
            if matches!(alg, Algorithm::SignMomentum { .. }) && xi < 0.0 {
                out.bad_steps += usize::from((u - cfg.eta).abs() > 1e-9 * cfg.eta);
            }
        }
    }
    Ok(out)
}

fn run_coupled(
    cfg: &SimpleDivergenceConfig,
    master_seed: u64,
) -> Result<(SimpleDivergenceConstants, Vec<PathOutcome>)> {
    let c = cfg.constants();
    let obj = make_quadratic(cfg.l0, vec![0.0])?;
    let oracle = make_affine_oracle(0.0, cfg.sigma1, cfg.eps)?;
    let outcomes = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| coupled_path(cfg, &c, &obj, &oracle, &replicate_stream(master_seed, 0, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok((c, outcomes))
}

fn coupling_report(outcomes: &[PathOutcome]) -> CouplingReport {
    CouplingReport {
        paths: outcomes.len(),
        coupling_violations: outcomes.iter().filter(|o| o.coupling_violation).count(),
        bad_step_violations: outcomes.iter().map(|o| o.bad_steps).sum(),
        pre_escape_violations: outcomes.iter().map(|o| o.pre_escape).sum(),
    }
}

/// Run the three methods and the reference process under one shared
/// multiplicative-noise sequence per path.
pub fn run_simple_alg_divergence(
    cfg: &SimpleDivergenceConfig,
    master_seed: u64,
) -> Result<SimpleDivergenceReport> {
    cfg.validate()?;
    let (c, outcomes) = run_coupled(cfg, master_seed)?;
    let failures = simple_algorithms(cfg)
        .iter()
        .enumerate()
        .map(|(i, alg)| {
            let empirical = numerics::proportion(
                outcomes.iter().filter(|o| o.failed[i]).count(),
                outcomes.len(),
            );
            FailureReport {
                algorithm: alg.name().to_string(),
                pass: empirical.at_least(c.bound, 3.0),
                empirical,
                bound: c.bound,
                t0: c.t0,
                delta: c.delta,
            }
        })
        .collect();
    Ok(SimpleDivergenceReport {
        constants: c,
        failures,
        coupling: coupling_report(&outcomes),
    })
}

/// Only the coupling checks of [`run_simple_alg_divergence`].
///
/// Momentum outside the admissible range is accepted here so that the
/// boundary can be explored; bad-step failures are then reported, not
/// treated as errors.
pub fn run_coupling_check(
    cfg: &SimpleDivergenceConfig,
    master_seed: u64,
) -> Result<CouplingReport> {
    let relaxed = SimpleDivergenceConfig {
        beta: 0.0,
        ..cfg.clone()
    };
    relaxed.validate()?;
    if !(0.0..1.0).contains(&cfg.beta) {
        return Err(ExperimentError::InvalidConfig(
            "beta must lie in [0, 1)".into(),
        ));
    }
    let (_, outcomes) = run_coupled(cfg, master_seed)?;
    Ok(coupling_report(&outcomes))
}

// ---------------------------------------------------------------------------
// AdaGrad divergence on the exponential
// ---------------------------------------------------------------------------

/// AdaGrad-Norm on `F(x) = exp(L1 x)` with large multiplicative noise.
///
/// Missing `sigma1`, `eps`, and `b0_sq` are filled in from the threshold:
/// `ε = σ1^{1/4} − 1`, `σ1` the smallest value meeting the lemma's bound
/// for `delta_target`, and `b0² = ε²L1²exp(2L1x1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGradDivergenceConfig {
    pub l1: f64,
    pub eta: f64,
    pub x1: f64,
    pub horizon: usize,
    pub replicates: usize,
    pub delta_target: f64,
    #[serde(default)]
    pub sigma1: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub b0_sq: Option<f64>,
}

/// Resolved constants of an AdaGrad divergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaGradDivergenceConstants {
    pub alpha: f64,
    pub sigma1: f64,
    pub eps: f64,
    pub b0_sq: f64,
    /// Smallest `σ1` meeting the threshold for `delta_target`.
    pub sigma1_threshold: f64,
    /// `(1+√2+log(T−1)/(2ηL1))² − 2`.
    pub t0: f64,
    /// Probability of the large factor, `1/(1+σ1²/(1+ε)²)`.
    pub delta: f64,
    /// `(1 − δ)^{t0}`.
    pub bound: f64,
}

/// `t0 = (1 + √2 + log(T−1)/(2ηL1))² − 2`.
///
/// ```
/// use gensmooth::experiments::adagrad_divergence_t0;
///
/// let t0 = adagrad_divergence_t0(0.5, 1.0, 1.0 + 2f64.exp());
/// assert!((t0 - 17.485).abs() < 1e-3);
/// ```
pub fn adagrad_divergence_t0(eta: f64, l1: f64, horizon: f64) -> f64 {
    (1.0 + 2f64.sqrt() + (horizon - 1.0).ln() / (2.0 * eta * l1)).powi(2) - 2.0
}

/// `K(α) = (1 + √2 + log(T−1)/α)² − 2`.
fn threshold_k(alpha: f64, horizon: usize) -> f64 {
    (1.0 + 2f64.sqrt() + ((horizon - 1) as f64).ln() / alpha).powi(2) - 2.0
}

/// Smallest `σ1` with `σ1² ≥ (1+ε)²K(α)/log(1/(1−δ))`.
///
/// With `eps = None`, `ε = σ1^{1/4} − 1` turns this into
/// `σ1^{3/2} = K/log(1/(1−δ))`.
pub fn adagrad_sigma1_threshold(
    alpha: f64,
    horizon: usize,
    delta_target: f64,
    eps: Option<f64>,
) -> f64 {
    let ratio = threshold_k(alpha, horizon) / (1.0 / (1.0 - delta_target)).ln();
    match eps {
        Some(e) => ((1.0 + e) * (1.0 + e) * ratio).sqrt(),
        None => ratio.powf(2.0 / 3.0),
    }
}

impl AdaGradDivergenceConfig {
    pub fn constants(&self) -> Result<AdaGradDivergenceConstants> {
        for (name, v) in [("L1", self.l1), ("eta", self.eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.horizon < 2 || self.replicates < MIN_REPLICATES {
            return Err(ExperimentError::InvalidConfig(format!(
                "need T >= 2 and at least {MIN_REPLICATES} replicates"
            )));
        }
        if !(self.delta_target > 0.0 && self.delta_target < 1.0) {
            return Err(ExperimentError::InvalidConfig(
                "delta_target must lie in (0, 1)".into(),
            ));
        }
        let alpha = self.eta * self.l1;
        let sigma1_threshold =
            adagrad_sigma1_threshold(alpha, self.horizon, self.delta_target, self.eps);
        let sigma1 = self.sigma1.unwrap_or(sigma1_threshold);
        if !(sigma1 > 1.0) {
            return Err(ExperimentError::Precondition(format!(
                "sigma1 > 1 fails for sigma1 = {sigma1}"
            )));
        }
        let eps = self.eps.unwrap_or(sigma1.powf(0.25) - 1.0);
        if !(eps > 0.0) {
            return Err(ExperimentError::Precondition(format!(
                "eps > 0 fails for eps = {eps}"
            )));
        }
        let b0_max = eps * eps * self.l1 * self.l1 * (2.0 * self.l1 * self.x1).exp();
        let b0_sq = self.b0_sq.unwrap_or(b0_max);
        if !(b0_sq > 0.0 && b0_sq <= b0_max * (1.0 + 1e-12)) {
            return Err(ExperimentError::Precondition(format!(
                "0 < b0^2 <= eps^2 L1^2 exp(2 L1 x1) = {b0_max} fails for b0^2 = {b0_sq}"
            )));
        }
        let t0 = adagrad_divergence_t0(self.eta, self.l1, self.horizon as f64);
        let delta = 1.0 / (1.0 + sigma1 * sigma1 / ((1.0 + eps) * (1.0 + eps)));
        Ok(AdaGradDivergenceConstants {
            alpha,
            sigma1,
            eps,
            b0_sq,
            sigma1_threshold,
            t0,
            delta,
            bound: (1.0 - delta).powf(t0),
        })
    }
}

/// Report of an AdaGrad divergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGradDivergenceReport {
    pub constants: AdaGradDivergenceConstants,
    pub failure: FailureReport,
    /// `empirical ≥ 1 − delta_target − 3·SE`.
    pub meets_target: bool,
}

/// Simulate in the log domain and count runs whose gradient never drops
/// below its initial value.
pub fn run_adagrad_divergence(
    cfg: &AdaGradDivergenceConfig,
    master_seed: u64,
) -> Result<AdaGradDivergenceReport> {
    let c = cfg.constants()?;
    let obj = make_exponential(cfg.l1)?;
    let oracle = make_affine_oracle(0.0, c.sigma1, c.eps)?;
    let spec = RunSpec {
        objective: &obj,
        oracle: &oracle,
        algorithm: Algorithm::AdagradNorm {
            eta: cfg.eta,
            b0_sq: c.b0_sq,
        },
        tie_break: TieBreak::Plus,
        horizon: cfg.horizon,
    };
    let log_g1 = obj.grad_log(cfg.x1).log_sq();
    let failed = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut never = true;
            simulate_log(
                &spec,
                cfg.x1,
                &replicate_stream(master_seed, 0, r),
                None,
                |v| {
                    never &= v.grad.log_sq() >= log_g1;
                },
            )?;
            Ok(never)
        })
        .collect::<Result<Vec<bool>>>()?;
    let empirical = numerics::proportion(failed.iter().filter(|&&f| f).count(), failed.len());
    Ok(AdaGradDivergenceReport {
        meets_target: empirical.at_least(1.0 - cfg.delta_target, 3.0),
        failure: FailureReport {
            algorithm: spec.algorithm.name().to_string(),
            pass: empirical.at_least(c.bound, 3.0),
            empirical,
            bound: c.bound,
            t0: c.t0,
            delta: c.delta,
        },
        constants: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crit8() -> SimpleDivergenceConfig {
        SimpleDivergenceConfig {
            l0: 1.0,
            gap: 0.5,
            sigma1: 4.0,
            eps: 2f64.sqrt(),
            gamma: 0.0,
            beta: 0.0,
            eta: 0.05,
            horizon: 200,
            replicates: 100,
            tie_break: TieBreak::Plus,
        }
    }

    #[test]
    fn simple_constants() {
        let c = crit8().constants();
        assert_eq!(c.lambda_clip, 1.0);
        assert_eq!(c.delta0, 0.5);
        assert!((c.delta - 0.2670).abs() < 5e-5);
        assert_eq!(c.t0, 55.0);
        assert_eq!(c.x1, -1.0);
    }

    #[test]
    fn simple_preconditions() {
        assert!(crit8().validate().is_ok());
        let bad = SimpleDivergenceConfig {
            sigma1: 2.0,
            ..crit8()
        };
        assert!(
            matches!(bad.validate(), Err(ExperimentError::Precondition(m)) if m.contains("sigma1^2"))
        );
        let bad = SimpleDivergenceConfig {
            beta: 0.2,
            ..crit8()
        };
        assert!(
            matches!(bad.validate(), Err(ExperimentError::Precondition(m)) if m.contains("beta"))
        );
    }

    #[test]
    fn adagrad_t0_example() {
        let t0 = adagrad_divergence_t0(0.5, 1.0, 1.0 + 2f64.exp());
        assert!((t0 - 17.485).abs() < 1e-3);
    }

    #[test]
    fn adagrad_threshold_is_fixed_point() {
        let s = adagrad_sigma1_threshold(0.5, 512, 0.25, None);
        let e = s.powf(0.25) - 1.0;
        let direct = adagrad_sigma1_threshold(0.5, 512, 0.25, Some(e));
        assert!((s - direct).abs() < 1e-9 * s);
    }

    #[test]
    fn exponential_large_noise_refused() {
        let obj = make_exponential(1.0).unwrap();
        let o = make_affine_oracle(0.0, 1.5, 0.0).unwrap();
        assert!(matches!(
            check_convergence_regime(&obj, &o),
            Err(ExperimentError::Regime(_))
        ));
    }
}
