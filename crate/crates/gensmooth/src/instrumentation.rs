//! Observational instrumentation for AdaGrad-Norm trajectories.
//!
//! * Decorrelated step `η̃_t = η/√(b_{t−1}² + σ0² + ‖∇F(w_t)‖²)`.
//! * Good times: `t` is good when `E_t[‖g_t‖²/b_t²] ≤ (1−Σε)²/(c_bias² σ1²)`.
//! * The nice stopping time: with `c_L = 2(1+ηL1)²` and `X_0 = 1`,
//!   `τ_t = min{t, first s with X_s = 0}`,
//!   `S_t = Σ_{s<τ_t} (‖g_s‖² + c_L‖∇F(w_s)‖²)` and
//!   `X_t = X_{t−1}·1{S_t ≤ E[S_t]/δ}`.
//!
//! The expectation `E[S_t]` is replaced by the ensemble mean `Ê[S_t]`,
//! computed one time step at a time across all paths so that the estimate
//! for step `t` is frozen before any path evaluates `X_t`.

use crate::numerics::{self, Estimate, RngStream};
use crate::objectives::{Objective, PolyBoundCert};
use crate::optimizers::TrajectoryRecord;
use crate::oracles::{conditional_second_moment_ratio, AffineOracle, OracleRngs};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Smallest ensemble accepted by [`build_stopping_ensemble`].
pub const MIN_ENSEMBLE: usize = 100;

/// Errors raised by the instrumentation layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstrumentationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trajectories disagree: {0}")]
    InconsistentEnsemble(String),
    #[error("objective {0} carries no polynomial-boundedness certificate")]
    UnsupportedObjective(String),
}

type Result<T> = std::result::Result<T, InstrumentationError>;

/// `η/√(b_{t−1}² + σ0² + ‖∇F(w_t)‖²)`.
///
/// Only the true gradient enters, so the value is fixed before `g_t` is drawn.
///
/// ```
/// use gensmooth::instrumentation::decorrelated_step;
///
/// assert_eq!(decorrelated_step(1.0, 1.0, 0.0, 3.0), 0.5);
/// ```
pub fn decorrelated_step(eta: f64, b_prev_sq: f64, sigma0: f64, true_grad_norm_sq: f64) -> f64 {
    eta / (b_prev_sq + sigma0 * sigma0 + true_grad_norm_sq).sqrt()
}

fn decorrelated_step_at(rec: &TrajectoryRecord, i: usize, sigma0: f64) -> Result<f64> {
    let log_b = rec.log_b_prev_sq(i).ok_or_else(|| {
        InstrumentationError::InvalidParameter(format!(
            "{} trajectories carry no AdaGrad accumulator",
            rec.algorithm
        ))
    })?;
    Ok(decorrelated_step(
        rec.eta,
        log_b.exp(),
        sigma0,
        rec.grad_norm_sq_value(i),
    ))
}

/// Decorrelated steps `η̃_1 … η̃_T` of an AdaGrad-Norm trajectory.
pub fn decorrelated_steps(rec: &TrajectoryRecord, sigma0: f64) -> Result<Vec<f64>> {
    (0..rec.len())
        .map(|i| decorrelated_step_at(rec, i, sigma0))
        .collect()
}

// ---------------------------------------------------------------------------
// Good times
// ---------------------------------------------------------------------------

/// Slack parameters for the good-time rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodTimeParams {
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    #[serde(default = "one")]
    pub c_bias: f64,
}

fn one() -> f64 {
    1.0
}

impl GoodTimeParams {
    /// All four slacks equal to `e`, with `c_bias = 1`.
    pub fn uniform(e: f64) -> Self {
        Self {
            eps: e,
            eps1: e,
            eps2: e,
            eps3: e,
            c_bias: 1.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.eps + self.eps1 + self.eps2 + self.eps3
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps, self.eps1, self.eps2, self.eps3];
        if all.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(InstrumentationError::InvalidParameter(
                "each slack must lie in [0, 1)".into(),
            ));
        }
        if self.total() >= 1.0 {
            return Err(InstrumentationError::InvalidParameter(format!(
                "eps + eps' + eps'' + eps''' = {} must be below 1",
                self.total()
            )));
        }
        if !(self.c_bias > 0.0) {
            return Err(InstrumentationError::InvalidParameter(
                "c_bias must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Threshold on `E_t[‖g‖²/b_t²]`; infinite when `σ1 = 0`.
    ///
    /// ```
    /// use gensmooth::instrumentation::GoodTimeParams;
    ///
    /// let th = GoodTimeParams::uniform(0.1).threshold(2.0);
    /// assert!((th - 0.09).abs() < 1e-15);
    /// ```
    pub fn threshold(&self, sigma1: f64) -> f64 {
        let m = 1.0 - self.total();
        m * m / (self.c_bias * self.c_bias * sigma1 * sigma1)
    }
}

/// Classification of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodTimeLabel {
    pub t: usize,
    pub is_good: bool,
    /// `c_bias·√E_t[‖g_t‖²/b_t²]`.
    pub bias: f64,
    pub threshold: f64,
}

/// Labels for a whole trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodTimeClassification {
    pub labels: Vec<GoodTimeLabel>,
    /// Bad times, 1-based and increasing.
    pub bad: Vec<usize>,
}

impl GoodTimeClassification {
    /// Number of bad times strictly before `tau`.
    pub fn bad_before(&self, tau: usize) -> usize {
        self.bad.partition_point(|&t| t < tau)
    }
}

/// Label every step of an AdaGrad-Norm trajectory.
///
/// The conditional moment comes from
/// [`conditional_second_moment_ratio`]: exact for `σ0 = 0`, quadrature for
/// `d = 1`, inner Monte Carlo otherwise.
pub fn classify_good_times(
    rec: &TrajectoryRecord,
    oracle: &AffineOracle,
    params: &GoodTimeParams,
) -> Result<GoodTimeClassification> {
    params.validate()?;
    let sigma1 = oracle.effective_sigma1();
    let threshold = params.threshold(sigma1);
    let mut labels = Vec::with_capacity(rec.len());
    let mut bad = Vec::new();
    for i in 0..rec.len() {
        let log_b = rec.log_b_prev_sq(i).ok_or_else(|| {
            InstrumentationError::InvalidParameter(
                "good times need an AdaGrad-Norm trajectory".into(),
            )
        })?;
        let ratio = conditional_second_moment_ratio(
            oracle,
            rec.grad_norm_sq_value(i),
            log_b.exp(),
            rec.dim,
        )
        .value;
        let is_good = ratio <= threshold;
        if !is_good {
            bad.push(i + 1);
        }
        labels.push(GoodTimeLabel {
            t: i + 1,
            is_good,
            bias: params.c_bias * ratio.sqrt(),
            threshold,
        });
    }
    Ok(GoodTimeClassification { labels, bad })
}

// ---------------------------------------------------------------------------
// Stopping ensemble
// ---------------------------------------------------------------------------

/// Per-path stopping data for `t = 0 … T+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingPath {
    /// `τ_t`, with `τ_0 = 0`.
    pub tau: Vec<usize>,
    /// `S_t`, with `S_0 = 0`.
    pub s: Vec<f64>,
    /// `X_t`, with `X_0 = 1`.
    pub x: Vec<bool>,
}

impl StoppingPath {
    pub fn tau_final(&self) -> usize {
        *self.tau.last().expect("path has T+2 entries")
    }
}

/// The stopping time evaluated over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingEnsemble {
    pub delta: f64,
    pub horizon: usize,
    pub eta: f64,
    pub l1: f64,
    pub c_l: f64,
    pub paths: Vec<StoppingPath>,
    /// `Ê[S_t]` for `t = 0 … T+1`.
    pub e_s_hat: Vec<f64>,
    /// Standard error of `Ê[S_t]`.
    pub e_s_se: Vec<f64>,
}

/// `c_L = 2(1+ηL1)²`.
pub fn c_l(eta: f64, l1: f64) -> f64 {
    2.0 * (1.0 + eta * l1) * (1.0 + eta * l1)
}

/// Default `δ = δ′/(4T)`.
pub fn default_delta(delta_prime: f64, horizon: usize) -> f64 {
    delta_prime / (4.0 * horizon as f64)
}

/// Increments `‖g_s‖² + c_L‖∇F(w_s)‖²` for `s = 1 … T`.
pub fn stopping_increments(rec: &TrajectoryRecord, c_l: f64) -> Vec<f64> {
    (0..rec.len())
        .map(|i| rec.log_sgrad_norm_sq(i).exp() + c_l * rec.grad_norm_sq_value(i))
        .collect()
}

/// Core recursion over pre-computed increments, up to time `t_max`.
///
/// Only `increments[p][..t_max − 1]` is read, which is what makes the
/// measurability check possible.
fn run_recursion(
    increments: &[Vec<f64>],
    delta: f64,
    t_max: usize,
) -> (Vec<StoppingPath>, Vec<f64>, Vec<f64>) {
    let n = increments.len();
    let mut paths: Vec<StoppingPath> = (0..n)
        .map(|_| StoppingPath {
            tau: vec![0],
            s: vec![0.0],
            x: vec![true],
        })
        .collect();
    let mut prefix: Vec<f64> = vec![0.0; n];
    let mut e_hat = vec![0.0];
    let mut e_se = vec![0.0];
    for t in 1..=t_max {
        paths
            .par_iter_mut()
            .zip(prefix.par_iter_mut())
            .zip(increments.par_iter())
            .for_each(|((p, pre), inc)| {
                let alive = *p.x.last().expect("X_0 present");
                let tau = if alive {
                    t
                } else {
                    *p.tau.last().expect("τ present")
                };
                // S_t sums increments s < τ_t; while alive that is s ≤ t−1.
                if alive && t >= 2 {
                    *pre += inc[t - 2];
                }
                p.tau.push(tau);
                p.s.push(*pre);
            });
        let values: Vec<f64> = paths.iter().map(|p| p.s[t]).collect();
        let est = numerics::mean_se(&values);
        let threshold = est.value / delta;
        paths.par_iter_mut().for_each(|p| {
            let prev = p.x[t - 1];
            p.x.push(prev && p.s[t] <= threshold);
        });
        e_hat.push(est.value);
        e_se.push(est.se);
    }
    (paths, e_hat, e_se)
}

fn check_ensemble(records: &[TrajectoryRecord], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(InstrumentationError::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if records.len() < MIN_ENSEMBLE {
        return Err(InstrumentationError::InvalidParameter(format!(
            "need at least {MIN_ENSEMBLE} trajectories, got {}",
            records.len()
        )));
    }
    let t = records[0].len();
    if t == 0 {
        return Err(InstrumentationError::InvalidParameter(
            "empty trajectories".into(),
        ));
    }
    if let Some(r) = records
        .iter()
        .find(|r| r.len() != t || r.eta != records[0].eta || r.algorithm != records[0].algorithm)
    {
        return Err(InstrumentationError::InconsistentEnsemble(format!(
            "expected {} with T={t}, eta={}, found {} with T={}, eta={}",
            records[0].algorithm,
            records[0].eta,
            r.algorithm,
            r.len(),
            r.eta
        )));
    }
    Ok(t)
}

/// Evaluate the stopping time on `N ≥ 100` trajectories of equal length.
pub fn build_stopping_ensemble(
    records: &[TrajectoryRecord],
    delta: f64,
    eta: f64,
    l1: f64,
) -> Result<StoppingEnsemble> {
    let horizon = check_ensemble(records, delta)?;
    let c = c_l(eta, l1);
    let incs: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| stopping_increments(r, c))
        .collect();
    let (paths, e_s_hat, e_s_se) = run_recursion(&incs, delta, horizon + 1);
    Ok(StoppingEnsemble {
        delta,
        horizon,
        eta,
        l1,
        c_l: c,
        paths,
        e_s_hat,
        e_s_se,
    })
}

impl StoppingEnsemble {
    pub fn n(&self) -> usize {
        self.paths.len()
    }

    /// Mean of `τ_{T+1}` with its standard error.
    pub fn mean_tau(&self) -> Estimate {
        let v: Vec<f64> = self.paths.iter().map(|p| p.tau_final() as f64).collect();
        numerics::mean_se(&v)
    }

    /// `(T+1)(1 − δT/2)`.
    pub fn mean_tau_lower_bound(&self) -> f64 {
        let t = self.horizon as f64;
        (t + 1.0) * (1.0 - self.delta * t / 2.0)
    }

    /// Histogram of `τ_{T+1}` values.
    pub fn tau_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for p in &self.paths {
            *h.entry(p.tau_final()).or_insert(0) += 1;
        }
        h
    }
}

/// Counts of violated per-path identities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingViolations {
    /// Breaches of `τ_{t+1} ≥ τ_t`, `S_{t+1} ≥ S_t`, `X_{t+1} ≤ X_t`.
    pub monotonicity: usize,
    /// Paths with `τ_{T+1} ∉ [2, T+1]`.
    pub range: usize,
    /// Paths where `τ_1, S_1, X_1, τ_2` differ from `1, 0, 1, 2`.
    pub initial: usize,
    /// Breaches of `S_{τ_t−1} ≤ Ê[S_{τ_t−1}]/δ`.
    pub threshold: usize,
    /// Breaches of `τ_{τ_t−1} = τ_t − 1`.
    pub nesting: usize,
    /// Entries of `X_t` that differ when recomputed from data up to `t−1`.
    pub measurability: usize,
}

impl StoppingViolations {
    pub fn total(&self) -> usize {
        self.monotonicity
            + self.range
            + self.initial
            + self.threshold
            + self.nesting
            + self.measurability
    }
}

/// Check the exact per-path identities of the stopping time.
///
/// The threshold identity is checked against `Ê[S_{τ_t−1}]`, which is at
/// most `Ê[S_T]` because `Ê[S_t]` is nondecreasing.
pub fn check_stopping_identities(ens: &StoppingEnsemble) -> StoppingViolations {
    let t_end = ens.horizon + 1;
    let mut v = StoppingViolations::default();
    for p in &ens.paths {
        for t in 0..t_end {
            v.monotonicity += usize::from(p.tau[t + 1] < p.tau[t]);
            v.monotonicity += usize::from(p.s[t + 1] < p.s[t]);
            v.monotonicity += usize::from(p.x[t + 1] && !p.x[t]);
        }
        let tf = p.tau_final();
        v.range += usize::from(!(2..=t_end).contains(&tf));
        let init_ok = p.tau[1] == 1 && p.s[1] == 0.0 && p.x[1] && p.tau[2] == 2;
        v.initial += usize::from(!init_ok);
        for t in 1..=t_end {
            let tm = p.tau[t] - 1;
            v.threshold += usize::from(p.s[tm] > ens.e_s_hat[tm] / ens.delta);
            v.nesting += usize::from(p.tau[tm] != tm);
        }
    }
    v
}

/// Recompute every `X_t` from trajectories truncated at `t − 1` and count
/// mismatches with the stored values.
pub fn check_measurability(records: &[TrajectoryRecord], ens: &StoppingEnsemble) -> usize {
    let incs: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| stopping_increments(r, ens.c_l))
        .collect();
    (1..=ens.horizon + 1)
        .into_par_iter()
        .map(|t| {
            let truncated: Vec<Vec<f64>> = incs.iter().map(|v| v[..t - 1].to_vec()).collect();
            let (paths, _, _) = run_recursion(&truncated, ens.delta, t);
            paths
                .iter()
                .zip(&ens.paths)
                .filter(|(a, b)| a.x[t] != b.x[t])
                .count()
        })
        .sum()
}

/// Compare `Ê[S_t]` built from two disjoint halves of the ensemble.
///
/// Returns the largest `|Ê_a − Ê_b| / √(se_a² + se_b²)` over `t` (zero
/// where both standard errors vanish and the estimates agree).
pub fn half_ensemble_agreement(
    records: &[TrajectoryRecord],
    delta: f64,
    eta: f64,
    l1: f64,
) -> Result<f64> {
    let mid = records.len() / 2;
    let a = build_stopping_ensemble(&records[..mid], delta, eta, l1)?;
    let b = build_stopping_ensemble(&records[mid..], delta, eta, l1)?;
    let mut worst: f64 = 0.0;
    for t in 0..a.e_s_hat.len() {
        let diff = (a.e_s_hat[t] - b.e_s_hat[t]).abs();
        let se = a.e_s_se[t].hypot(b.e_s_se[t]);
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok(worst)
}

/// Constants needed by the step-size lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBoundInputs {
    pub b0_sq: f64,
    pub l0: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

/// Outcome of [`check_stopping_step_lower_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBoundReport {
    /// `η/√(a + (Tσ0² + b·Ê[Σ_{ℓ<τ_{T+1}}‖∇F_ℓ‖²])/δ)`.
    pub bound: f64,
    pub checked: usize,
    pub violations: usize,
    /// Smallest `η̃_s / bound` over all checked steps.
    pub min_ratio: f64,
}

/// Check `η̃_s ≥ bound` for every `s < τ_{T+1}` on every path, with
/// `a = b0² + 2η²L0²`, `b = 1 + σ1² + c_L`, and the expectation replaced by
/// the ensemble mean.
pub fn check_stopping_step_lower_bound(
    records: &[TrajectoryRecord],
    ens: &StoppingEnsemble,
    inputs: &StepBoundInputs,
) -> Result<StepBoundReport> {
    let eta = ens.eta;
    let sums: Vec<f64> = records
        .iter()
        .zip(&ens.paths)
        .map(|(r, p)| numerics::kahan_sum((0..p.tau_final() - 1).map(|i| r.grad_norm_sq_value(i))))
        .collect();
    let e_sum = numerics::mean_se(&sums).value;
    let a = inputs.b0_sq + 2.0 * eta * eta * inputs.l0 * inputs.l0;
    let b = 1.0 + inputs.sigma1 * inputs.sigma1 + ens.c_l;
    let t = ens.horizon as f64;
    let bound = eta / (a + (t * inputs.sigma0 * inputs.sigma0 + b * e_sum) / ens.delta).sqrt();
    let per_path: Vec<(usize, usize, f64)> = records
        .par_iter()
        .zip(ens.paths.par_iter())
        .map(|(r, p)| {
            let mut bad = 0;
            let mut worst = f64::INFINITY;
            let n = p.tau_final() - 1;
            for i in 0..n {
                let step = decorrelated_step_at(r, i, inputs.sigma0).unwrap_or(f64::NAN);
                let ratio = step / bound;
                worst = worst.min(ratio);
                bad += usize::from(!(step >= bound));
            }
            (n, bad, worst)
        })
        .collect();
    if records.iter().any(|r| r.b0_sq.is_none()) {
        return Err(InstrumentationError::InvalidParameter(
            "step-size bound needs AdaGrad-Norm trajectories".into(),
        ));
    }
    Ok(StepBoundReport {
        bound,
        checked: per_path.iter().map(|x| x.0).sum(),
        violations: per_path.iter().map(|x| x.1).sum(),
        min_ratio: per_path.iter().map(|x| x.2).fold(f64::INFINITY, f64::min),
    })
}

// ---------------------------------------------------------------------------
// Bad-set moments and compensation
// ---------------------------------------------------------------------------

/// Empirical bad-set moment against its analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    /// Empirical `E[|S^c|^k]` over the ensemble.
    pub empirical: Estimate,
    /// `((k+1)σ1² log f / (1−Σε)²)^k`.
    pub bound: f64,
    /// `f = e + (eσ0²(T−1) + e(1+σ1²+c_L)·Ê[Σ_{t<τ_T}‖∇F_t‖²])/(b0²δ)`.
    pub f: f64,
    pub pass: bool,
}

/// Moment of the number of bad times before `τ_{T+1}`, with the analytic
/// bound evaluated from the ensemble estimate of `E[Σ_{t<τ_T}‖∇F_t‖²]`.
///
/// `pass` means `empirical ≤ bound + 3·SE`.
pub fn bad_set_moment_report(
    records: &[TrajectoryRecord],
    ens: &StoppingEnsemble,
    labels: &[GoodTimeClassification],
    params: &GoodTimeParams,
    oracle: &AffineOracle,
    k: u32,
) -> Result<MomentReport> {
    params.validate()?;
    if labels.len() != ens.n() || records.len() != ens.n() {
        return Err(InstrumentationError::InconsistentEnsemble(
            "labels, records, and ensemble differ in size".into(),
        ));
    }
    let b0_sq = records[0]
        .log_b_prev_sq(0)
        .ok_or_else(|| {
            InstrumentationError::InvalidParameter("need AdaGrad-Norm trajectories".into())
        })?
        .exp();
    let counts: Vec<f64> = labels
        .iter()
        .zip(&ens.paths)
        .map(|(l, p)| (l.bad_before(p.tau_final()) as f64).powi(k as i32))
        .collect();
    let empirical = numerics::mean_se(&counts);
    let t_big = ens.horizon;
    let sums: Vec<f64> = records
        .iter()
        .zip(&ens.paths)
        .map(|(r, p)| numerics::kahan_sum((0..p.tau[t_big] - 1).map(|i| r.grad_norm_sq_value(i))))
        .collect();
    let e_sum = numerics::mean_se(&sums).value;
    let s0 = oracle.effective_sigma0();
    let s1 = oracle.effective_sigma1();
    let e = std::f64::consts::E;
    let f = e
        + (e * s0 * s0 * (t_big as f64 - 1.0) + e * (1.0 + s1 * s1 + ens.c_l) * e_sum)
            / (b0_sq * ens.delta);
    let m = 1.0 - params.total();
    let bound = ((k as f64 + 1.0) * s1 * s1 * f.ln() / (m * m)).powi(k as i32);
    Ok(MomentReport {
        k,
        pass: empirical.at_most(bound, 3.0),
        empirical,
        bound,
        f,
    })
}

/// `n_comp = ⌈4c_k³(σ1 − (1−ε−ε′))₊/ε‴⌉`.
///
/// ```
/// use gensmooth::instrumentation::n_comp;
///
/// assert_eq!(n_comp(2.0, 0.1, 0.1, 0.2, 1.0), 24);
/// assert_eq!(n_comp(0.5, 0.1, 0.1, 0.2, 1.0), 0);
/// ```
pub fn n_comp(sigma1: f64, eps: f64, eps1: f64, eps3: f64, c_k: f64) -> usize {
    let excess = (sigma1 - (1.0 - eps - eps1)).max(0.0);
    // Round away representation noise such as 4·1.2/0.2 = 24.000000000000004.
    let raw = 4.0 * c_k.powi(3) * excess / eps3;
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Greedy compensation sets: bad times are visited from the latest down,
/// and each takes up to `n_comp` of the largest good times below both
/// itself and the previous set's smallest element.
///
/// Once a set comes up short, every later set is empty.
pub fn compensation_sets(bad: &[usize], good: &[usize], n_comp: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::with_capacity(bad.len());
    let mut ceiling = usize::MAX;
    let mut exhausted = n_comp == 0;
    for &b in bad.iter().rev() {
        let mut set = Vec::new();
        if !exhausted {
            let limit = b.min(ceiling);
            let end = good.partition_point(|&g| g < limit);
            let take = n_comp.min(end);
            set.extend(good[end - take..end].iter().rev());
            if take < n_comp {
                exhausted = true;
            } else {
                ceiling = *set.last().expect("set is full");
            }
        }
        out.push((b, set));
    }
    out
}

/// Per-path ledger and the analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationReport {
    pub n_comp: usize,
    pub ledger: Vec<f64>,
    pub mean_ledger: Estimate,
    pub bound: f64,
    pub pass: bool,
}

/// Evaluate
/// `Σ_{bad}(σ1−(1−ε−ε′))η̃_t‖∇F_t‖² − Σ_{comp}ε‴η̃_t‖∇F_t‖²` per path over
/// `[τ_{T+1} − 1]`, and the bound
/// `η(σ1−(1−ε−ε′))₊c_k‖∇F_1‖E|S^c| + η n_comp^{k−1} max{c_k′η^{k−1}, L0η}((σ1−(1−ε−ε′))₊ + ε‴n_comp/(2c_k³))E|S^c|^k`.
///
/// `pass` means the mean ledger is at most `bound + 3·SE`, where the bad
/// set moments in the bound are their empirical means.
pub fn compensation_ledger(
    objective: &Objective,
    oracle: &AffineOracle,
    records: &[TrajectoryRecord],
    ens: &StoppingEnsemble,
    labels: &[GoodTimeClassification],
    params: &GoodTimeParams,
) -> Result<CompensationReport> {
    params.validate()?;
    let PolyBoundCert {
        k,
        c_k,
        c_k_prime,
        l0,
        ..
    } = objective
        .poly
        .ok_or_else(|| InstrumentationError::UnsupportedObjective(objective.name().to_string()))?;
    let sigma0 = oracle.effective_sigma0();
    let sigma1 = oracle.effective_sigma1();
    let excess = sigma1 - (1.0 - params.eps - params.eps1);
    let nc = n_comp(sigma1, params.eps, params.eps1, params.eps3, c_k);
    let mut ledgers = Vec::with_capacity(records.len());
    let mut card = Vec::with_capacity(records.len());
    let mut card_k = Vec::with_capacity(records.len());
    for ((r, p), l) in records.iter().zip(&ens.paths).zip(labels) {
        let tau = p.tau_final();
        let bad: Vec<usize> = l.bad.iter().copied().filter(|&t| t < tau).collect();
        let good: Vec<usize> = l
            .labels
            .iter()
            .filter(|x| x.is_good && x.t < tau)
            .map(|x| x.t)
            .collect();
        let weight = |t: usize| -> Result<f64> {
            Ok(decorrelated_step_at(r, t - 1, sigma0)? * r.grad_norm_sq_value(t - 1))
        };
        let mut acc = numerics::KahanSum::new();
        for (b, set) in compensation_sets(&bad, &good, nc) {
            acc.add(excess * weight(b)?);
            for g in set {
                acc.add(-params.eps3 * weight(g)?);
            }
        }
        ledgers.push(acc.value());
        card.push(bad.len() as f64);
        card_k.push((bad.len() as f64).powi(k as i32));
    }
    let mean_ledger = numerics::mean_se(&ledgers);
    let eta = ens.eta;
    let g1 = records[0].grad_norm_sq_value(0).sqrt();
    let e1 = numerics::mean_se(&card).value;
    let ek = numerics::mean_se(&card_k).value;
    let pos = excess.max(0.0);
    let bound = eta * pos * c_k * g1 * e1
        + eta
            * (nc as f64).powi(k as i32 - 1)
            * (c_k_prime * eta.powi(k as i32 - 1)).max(l0 * eta)
            * (pos + params.eps3 * nc as f64 / (2.0 * c_k.powi(3)))
            * ek;
    Ok(CompensationReport {
        n_comp: nc,
        pass: mean_ledger.at_most(bound, 3.0),
        ledger: ledgers,
        mean_ledger,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Decorrelation
// ---------------------------------------------------------------------------

/// Resampling check of `E_t[η̃_t g_t] = η̃_t ∇F(w_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationReport {
    /// Per component: mean of `η̃_t g_t` minus `η̃_t ∇F`, with SE.
    pub decorrelated: Vec<Estimate>,
    /// Per component: mean of `η_t g_t` minus `η̃_t ∇F`, with SE.
    pub adaptive: Vec<Estimate>,
}

impl DecorrelationReport {
    /// True when every decorrelated component is within `k` SE of zero.
    pub fn decorrelated_unbiased(&self, k: f64) -> bool {
        self.decorrelated.iter().all(|e| e.within(0.0, k))
    }

    /// True when some adaptive component is more than `k` SE from zero.
    pub fn adaptive_biased(&self, k: f64) -> bool {
        self.adaptive.iter().any(|e| !e.within(0.0, k))
    }
}

/// Redraw `g_t` `n` times at a fixed state `(∇F(w_t), b_{t−1}²)`.
pub fn decorrelation_check(
    oracle: &AffineOracle,
    grad: &[f64],
    b_prev_sq: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> DecorrelationReport {
    let d = grad.len();
    let gns = numerics::norm_sq(grad);
    let tilde = decorrelated_step(eta, b_prev_sq, oracle.effective_sigma0(), gns);
    let mut rngs = OracleRngs::new(stream);
    let mut dec = vec![numerics::RunningMoments::new(); d];
    let mut ada = vec![numerics::RunningMoments::new(); d];
    for _ in 0..n {
        let (g, _) = oracle.sample(grad, &mut rngs, None);
        let step = eta / (b_prev_sq + numerics::norm_sq(&g)).sqrt();
        for j in 0..d {
            dec[j].push(tilde * g[j] - tilde * grad[j]);
            ada[j].push(step * g[j] - tilde * grad[j]);
        }
    }
    DecorrelationReport {
        decorrelated: dec.iter().map(|m| m.estimate()).collect(),
        adaptive: ada.iter().map(|m| m.estimate()).collect(),
    }
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

/// JSON-ready summary of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mean_tau: Estimate,
    pub tau_histogram: BTreeMap<usize, usize>,
    #[serde(rename = "E_S_hat")]
    pub e_s_hat: Vec<f64>,
    pub violations: BTreeMap<String, usize>,
}

/// Summarize an ensemble with named violation counts.
pub fn summarize(ens: &StoppingEnsemble, violations: BTreeMap<String, usize>) -> EnsembleSummary {
    EnsembleSummary {
        delta: ens.delta,
        n: ens.n(),
        horizon: ens.horizon,
        mean_tau: ens.mean_tau(),
        tau_histogram: ens.tau_histogram(),
        e_s_hat: ens.e_s_hat.clone(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decorrelated_examples() {
        assert_eq!(decorrelated_step(1.0, 1.0, 0.0, 3.0), 0.5);
        assert_eq!(decorrelated_step(2.0, 4.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn thresholds() {
        let p = GoodTimeParams::uniform(0.1);
        assert!((p.threshold(2.0) - 0.09).abs() < 1e-15);
        assert!(p.threshold(0.0).is_infinite());
        assert!(GoodTimeParams::uniform(0.25).validate().is_err());
    }

    #[test]
    fn compensation_greedy() {
        // Bad times 10 and 6, good times 1..=9 without 6, two per set.
        let good = [1, 2, 3, 4, 5, 7, 8, 9];
        let sets = compensation_sets(&[6, 10], &good, 2);
        assert_eq!(sets, vec![(10, vec![9, 8]), (6, vec![5, 4])]);
        let sets = compensation_sets(&[2, 10], &good, 2);
        assert_eq!(sets, vec![(10, vec![9, 8]), (2, vec![1])]);
        let sets = compensation_sets(&[1, 2, 10], &[3, 4, 5], 4);
        assert_eq!(sets, vec![(10, vec![5, 4, 3]), (2, vec![]), (1, vec![])]);
        assert!(compensation_sets(&[5], &[1, 2], 0)[0].1.is_empty());
    }

    #[test]
    fn recursion_small_case() {
        // Path increments chosen so that path 0 exceeds the mean at t = 3.
        let incs = vec![vec![1.0, 5.0, 0.0], vec![1.0, 0.0, 0.0]];
        let (paths, e, _) = run_recursion(&incs, 1.0, 4);
        assert_eq!(e[2], 1.0);
        assert_eq!(e[3], 3.5);
        assert_eq!(paths[0].x, vec![true, true, true, false, false]);
        assert_eq!(paths[0].tau, vec![0, 1, 2, 3, 3]);
        assert_eq!(paths[1].tau, vec![0, 1, 2, 3, 4]);
        assert_eq!(paths[0].s[4], 6.0);
    }
}
