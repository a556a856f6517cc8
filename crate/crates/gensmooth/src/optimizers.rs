//! Update rules and the trajectory runner.
//!
//! * AdaGrad-Norm: `b_t² = b_{t−1}² + ‖g_t‖²`, then `w_{t+1} = w_t − (η/b_t) g_t`.
//! * Fixed step: `w_{t+1} = w_t − η g_t`.
//! * Normalized SGD: `u_t = η g_t/(γ + ‖g_t‖)`.
//! * Clipped SGD: `u_t = η g_t/max{γ, ‖g_t‖}`.
//! * SignSGD with momentum: `m_t = β m_{t−1} + (1−β) g_t`, `u_t = η sign(m_t)`.
//!
//! One-dimensional objectives run in the log domain: gradients and the
//! AdaGrad accumulator are [`LogMagnitude`] values, while the iterate `x_t`
//! itself stays a plain float because every step is at most `η` long.

use crate::numerics::{self, LogMagnitude, RngStream};
use crate::objectives::{Objective, ObjectiveSpec};
use crate::oracles::{AffineOracle, OracleRngs};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Largest `L1·|x|` allowed before plain floats are refused.
pub const PLAIN_FLOAT_EXPONENT_LIMIT: f64 = 600.0;

/// Errors raised by the runner.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid run parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite {what} at step {t}")]
    NonFinite { t: usize, what: &'static str },
    #[error(
        "plain floats can overflow: L1·(|x1| + T·η) = {reach} exceeds {PLAIN_FLOAT_EXPONENT_LIMIT}; use the log-domain runner"
    )]
    OverflowRisk { reach: f64 },
}

/// Policy for `sign(0)` and for a zero normalizer denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Step `+η` (so `w` moves by `−η`).
    #[default]
    Plus,
    /// Step `−η`.
    Minus,
}

impl TieBreak {
    fn sign(self) -> f64 {
        match self {
            TieBreak::Plus => 1.0,
            TieBreak::Minus => -1.0,
        }
    }
}

/// An update rule with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    AdagradNorm { eta: f64, b0_sq: f64 },
    Fixed { eta: f64 },
    Normalized { eta: f64, gamma: f64 },
    Clipped { eta: f64, gamma: f64 },
    SignMomentum { eta: f64, beta: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AdagradNorm { .. } => "adagrad-norm",
            Algorithm::Fixed { .. } => "fixed",
            Algorithm::Normalized { .. } => "normalized-sgd",
            Algorithm::Clipped { .. } => "clipped-sgd",
            Algorithm::SignMomentum { .. } => "sign-sgd-momentum",
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            Algorithm::AdagradNorm { eta, .. }
            | Algorithm::Fixed { eta }
            | Algorithm::Normalized { eta, .. }
            | Algorithm::Clipped { eta, .. }
            | Algorithm::SignMomentum { eta, .. } => eta,
        }
    }

    /// True when every step is at most `η` long (per component for sign steps).
    pub fn has_bounded_steps(&self) -> bool {
        !matches!(self, Algorithm::Fixed { .. })
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::InvalidParameter(m));
        let eta = self.eta();
        if !(eta > 0.0 && eta.is_finite()) {
            return bad(format!("eta must be positive, got {eta}"));
        }
        match *self {
            Algorithm::AdagradNorm { b0_sq, .. } if !(b0_sq > 0.0 && b0_sq.is_finite()) => {
                bad(format!("b0^2 must be positive, got {b0_sq}"))
            }
            Algorithm::Normalized { gamma, .. } | Algorithm::Clipped { gamma, .. }
                if !(gamma >= 0.0 && gamma.is_finite()) =>
            {
                bad(format!("gamma must be nonnegative, got {gamma}"))
            }
            Algorithm::SignMomentum { beta, .. } if !(0.0..1.0).contains(&beta) => {
                bad(format!("beta must lie in [0, 1), got {beta}"))
            }
            _ => Ok(()),
        }
    }
}

/// Fixed step `min{1/L0, √(2(F(w1) − F*)/(L0 σ0² T))}`.
///
/// ```
/// use gensmooth::optimizers::gl13_step;
///
/// let eta = gl13_step(1.0, 1.0, 0.5, 8);
/// assert!((eta - 0.125f64.sqrt()).abs() < 1e-15);
/// ```
pub fn gl13_step(l0: f64, sigma0: f64, gap: f64, horizon: usize) -> f64 {
    let noisy = (2.0 * gap / (l0 * sigma0 * sigma0 * horizon as f64)).sqrt();
    (1.0 / l0).min(noisy)
}

// ---------------------------------------------------------------------------
// Single-step states
// ---------------------------------------------------------------------------

/// AdaGrad-Norm state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub eta: f64,
    pub b_sq: f64,
    pub w: Vec<f64>,
    pub t: usize,
}

/// One AdaGrad-Norm step; returns the step length.
///
/// ```
/// use gensmooth::optimizers::{step_adagrad_norm, AdaGradState};
///
/// let mut s = AdaGradState { eta: 1.0, b_sq: 1.0, w: vec![0.0], t: 0 };
/// let len = step_adagrad_norm(&mut s, &[3f64.sqrt()]);
/// assert!((s.b_sq - 4.0).abs() < 1e-15);
/// assert!((len - 3f64.sqrt() / 2.0).abs() < 1e-15);
/// ```
pub fn step_adagrad_norm(state: &mut AdaGradState, g: &[f64]) -> f64 {
    state.b_sq += numerics::norm_sq(g);
    let scale = state.eta / state.b_sq.sqrt();
    for (w, gi) in state.w.iter_mut().zip(g) {
        *w -= scale * gi;
    }
    state.t += 1;
    scale * numerics::norm(g)
}

/// One fixed-step update; returns the step length.
pub fn step_fixed(w: &mut [f64], g: &[f64], eta: f64) -> f64 {
    for (wi, gi) in w.iter_mut().zip(g) {
        *wi -= eta * gi;
    }
    eta * numerics::norm(g)
}

/// Normalized or clipped mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerMode {
    Normalized,
    Clipped,
}

/// State for normalized and clipped SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerState {
    pub eta: f64,
    pub gamma: f64,
    pub mode: NormalizerMode,
    pub w: Vec<f64>,
    pub t: usize,
    pub tie_break: TieBreak,
}

/// Result of a step that may invoke the tie-break.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub step_len: f64,
    pub tie_break_used: bool,
}

/// One normalized or clipped step.
///
/// When the denominator vanishes the tie-break moves `w` by `∓η` along the
/// first coordinate.
pub fn step_norm_or_clip(state: &mut NormalizerState, g: &[f64]) -> StepOutcome {
    let gn = numerics::norm(g);
    let denom = match state.mode {
        NormalizerMode::Normalized => state.gamma + gn,
        NormalizerMode::Clipped => state.gamma.max(gn),
    };
    state.t += 1;
    if denom == 0.0 {
        state.w[0] -= state.tie_break.sign() * state.eta;
        return StepOutcome {
            step_len: state.eta,
            tie_break_used: true,
        };
    }
    let scale = state.eta / denom;
    for (w, gi) in state.w.iter_mut().zip(g) {
        *w -= scale * gi;
    }
    StepOutcome {
        step_len: scale * gn,
        tie_break_used: false,
    }
}

/// State for SignSGD with momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMomentumState {
    pub eta: f64,
    pub beta: f64,
    pub m: Vec<f64>,
    pub w: Vec<f64>,
    pub t: usize,
    pub tie_break: TieBreak,
}

/// One SignSGD-with-momentum step.
///
/// ```
/// use gensmooth::optimizers::{step_sign_momentum, SignMomentumState, TieBreak};
///
/// let mut s = SignMomentumState { eta: 0.1, beta: 0.5, m: vec![4.0], w: vec![0.0], t: 0, tie_break: TieBreak::Plus };
/// step_sign_momentum(&mut s, &[-2.0]);
/// assert_eq!(s.m, vec![1.0]);
/// assert_eq!(s.w, vec![-0.1]);
/// ```
pub fn step_sign_momentum(state: &mut SignMomentumState, g: &[f64]) -> StepOutcome {
    let mut tie = false;
    let mut len_sq = 0.0;
    for ((m, w), gi) in state.m.iter_mut().zip(state.w.iter_mut()).zip(g) {
        *m = state.beta * *m + (1.0 - state.beta) * gi;
        let s = if *m > 0.0 {
            1.0
        } else if *m < 0.0 {
            -1.0
        } else {
            tie = true;
            state.tie_break.sign()
        };
        *w -= state.eta * s;
        len_sq += state.eta * state.eta;
    }
    state.t += 1;
    StepOutcome {
        step_len: len_sq.sqrt(),
        tie_break_used: tie,
    }
}

// ---------------------------------------------------------------------------
// Trajectory records
// ---------------------------------------------------------------------------

/// Time-indexed log of one run; index `i` holds step `t = i + 1`.
///
/// When `log_domain` is set, `grad_norm_sq`, `sgrad_norm_sq`, `b_sq`,
/// `b0_sq`, and `min_grad_sq_so_far` hold natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub algorithm: String,
    pub log_domain: bool,
    pub dim: usize,
    pub eta: f64,
    pub b0_sq: Option<f64>,
    /// Iterates `w_1 … w_T`.
    pub w: Vec<Vec<f64>>,
    /// The final iterate `w_{T+1}`.
    pub w_final: Vec<f64>,
    pub grad_norm_sq: Vec<f64>,
    pub sgrad_norm_sq: Vec<f64>,
    pub xi: Vec<f64>,
    pub step_len: Vec<f64>,
    /// `b_t²` after including `g_t`; empty for other algorithms.
    pub b_sq: Vec<f64>,
    /// Momentum `m_t`; empty for other algorithms.
    pub momentum: Vec<Vec<f64>>,
    pub tie_break_used: Vec<bool>,
    pub min_grad_sq_so_far: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.grad_norm_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad_norm_sq.is_empty()
    }

    fn to_log(&self, v: f64) -> f64 {
        if self.log_domain {
            v
        } else {
            v.ln()
        }
    }

    /// `log ‖∇F(w_{i+1})‖²`.
    pub fn log_grad_norm_sq(&self, i: usize) -> f64 {
        self.to_log(self.grad_norm_sq[i])
    }

    /// `log ‖g_{i+1}‖²`.
    pub fn log_sgrad_norm_sq(&self, i: usize) -> f64 {
        self.to_log(self.sgrad_norm_sq[i])
    }

    /// `‖∇F(w_{i+1})‖²` as a float (may be infinite in log-domain runs).
    pub fn grad_norm_sq_value(&self, i: usize) -> f64 {
        self.log_grad_norm_sq(i).exp()
    }

    /// `log b_{i}²`, the accumulator before step `i + 1`.
    pub fn log_b_prev_sq(&self, i: usize) -> Option<f64> {
        let b0 = self.b0_sq?;
        Some(if i == 0 {
            self.to_log(b0)
        } else {
            self.to_log(self.b_sq[i - 1])
        })
    }

    /// `log b_{i+1}²`, the accumulator used by step `i + 1`.
    pub fn log_b_sq(&self, i: usize) -> Option<f64> {
        self.b_sq.get(i).map(|&v| self.to_log(v))
    }

    /// Final `log min_t ‖∇F(w_t)‖²`.
    pub fn log_min_grad_sq(&self) -> f64 {
        self.to_log(*self.min_grad_sq_so_far.last().unwrap_or(&f64::NAN))
    }

    /// Iterate `w_{i+1}`, with `i = len()` giving the final iterate.
    pub fn iterate(&self, i: usize) -> &[f64] {
        if i < self.w.len() {
            &self.w[i]
        } else {
            &self.w_final
        }
    }

    /// CSV with columns
    /// `t,w,grad_norm_sq,sgrad_norm_sq,xi,step_len,b_sq,min_grad_sq_so_far`.
    ///
    /// Vector iterates are flattened with `;`. Floats use the shortest
    /// representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,w,grad_norm_sq,sgrad_norm_sq,xi,step_len,b_sq,min_grad_sq_so_far\n");
        for i in 0..self.len() {
            let w = self.w[i]
                .iter()
                .map(|&x| numerics::fmt_float(x))
                .collect::<Vec<_>>()
                .join(";");
            let b = self
                .b_sq
                .get(i)
                .map(|&v| numerics::fmt_float(v))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                i + 1,
                w,
                numerics::fmt_float(self.grad_norm_sq[i]),
                numerics::fmt_float(self.sgrad_norm_sq[i]),
                numerics::fmt_float(self.xi[i]),
                numerics::fmt_float(self.step_len[i]),
                b,
                numerics::fmt_float(self.min_grad_sq_so_far[i])
            );
        }
        out
    }

    /// FNV-1a hash of the CSV rendering, used for determinism checks.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(self.to_csv().as_bytes())
    }
}

/// 64-bit FNV-1a hash.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Simulation core
// ---------------------------------------------------------------------------

/// Everything observable about one step of a plain-float run.
#[derive(Debug)]
pub struct StepView<'a> {
    pub t: usize,
    pub w: &'a [f64],
    pub grad: &'a [f64],
    pub grad_norm_sq: f64,
    pub g: &'a [f64],
    pub sgrad_norm_sq: f64,
    pub xi: f64,
    pub step_len: f64,
    /// `b_t²` for AdaGrad-Norm, NaN otherwise.
    pub b_sq: f64,
    pub momentum: Option<&'a [f64]>,
    pub tie_break_used: bool,
    pub w_next: &'a [f64],
}

/// Everything observable about one step of a log-domain run.
#[derive(Debug, Clone, Copy)]
pub struct LogStepView {
    pub t: usize,
    pub x: f64,
    pub grad: LogMagnitude,
    pub g: LogMagnitude,
    pub xi: f64,
    pub step_len: f64,
    /// `log b_t²` for AdaGrad-Norm, NaN otherwise.
    pub log_b_sq: f64,
    pub momentum: Option<LogMagnitude>,
    pub tie_break_used: bool,
    pub x_next: f64,
}

/// Shared inputs of a run.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec<'a> {
    pub objective: &'a Objective,
    pub oracle: &'a AffineOracle,
    pub algorithm: Algorithm,
    pub tie_break: TieBreak,
    pub horizon: usize,
}

enum State {
    AdaGrad(AdaGradState),
    Fixed { eta: f64, w: Vec<f64> },
    Norm(NormalizerState),
    Sign(SignMomentumState),
}

impl State {
    fn new(alg: Algorithm, w1: Vec<f64>, tie_break: TieBreak) -> State {
        let d = w1.len();
        match alg {
            Algorithm::AdagradNorm { eta, b0_sq } => State::AdaGrad(AdaGradState {
                eta,
                b_sq: b0_sq,
                w: w1,
                t: 0,
            }),
            Algorithm::Fixed { eta } => State::Fixed { eta, w: w1 },
            Algorithm::Normalized { eta, gamma } | Algorithm::Clipped { eta, gamma } => {
                State::Norm(NormalizerState {
                    eta,
                    gamma,
                    mode: if matches!(alg, Algorithm::Normalized { .. }) {
                        NormalizerMode::Normalized
                    } else {
                        NormalizerMode::Clipped
                    },
                    w: w1,
                    t: 0,
                    tie_break,
                })
            }
            Algorithm::SignMomentum { eta, beta } => State::Sign(SignMomentumState {
                eta,
                beta,
                m: vec![0.0; d],
                w: w1,
                t: 0,
                tie_break,
            }),
        }
    }

    fn w(&self) -> &[f64] {
        match self {
            State::AdaGrad(s) => &s.w,
            State::Fixed { w, .. } => w,
            State::Norm(s) => &s.w,
            State::Sign(s) => &s.w,
        }
    }

    fn step(&mut self, g: &[f64]) -> StepOutcome {
        match self {
            State::AdaGrad(s) => StepOutcome {
                step_len: step_adagrad_norm(s, g),
                tie_break_used: false,
            },
            State::Fixed { eta, w } => StepOutcome {
                step_len: step_fixed(w, g, *eta),
                tie_break_used: false,
            },
            State::Norm(s) => step_norm_or_clip(s, g),
            State::Sign(s) => step_sign_momentum(s, g),
        }
    }
}

fn check_inputs(spec: &RunSpec, w1: &[f64], xi: Option<&[f64]>) -> Result<(), RunError> {
    spec.algorithm.validate()?;
    if spec.horizon == 0 {
        return Err(RunError::InvalidParameter(
            "horizon T must be at least 1".into(),
        ));
    }
    if w1.len() != spec.objective.dim() {
        return Err(RunError::InvalidParameter(format!(
            "w1 has dimension {}, objective has {}",
            w1.len(),
            spec.objective.dim()
        )));
    }
    if !numerics::all_finite(w1) {
        return Err(RunError::InvalidParameter("w1 must be finite".into()));
    }
    if let Some(xs) = xi {
        if xs.len() < spec.horizon {
            return Err(RunError::InvalidParameter(format!(
                "pre-drawn noise has {} entries, need {}",
                xs.len(),
                spec.horizon
            )));
        }
    }
    Ok(())
}

/// Run in plain floats, calling `observe` after every step.
///
/// Refuses objectives with exponential growth whenever the iterate could
/// reach `L1·|x| > 600` within the horizon.
pub fn simulate<F>(
    spec: &RunSpec,
    w1: &[f64],
    stream: &RngStream,
    xi: Option<&[f64]>,
    mut observe: F,
) -> Result<(), RunError>
where
    F: FnMut(&StepView),
{
    check_inputs(spec, w1, xi)?;
    if let Some(l1) = spec.objective.growth_rate() {
        let reach = if spec.algorithm.has_bounded_steps() {
            l1 * (w1[0].abs() + spec.horizon as f64 * spec.algorithm.eta())
        } else {
            f64::INFINITY
        };
        if spec.objective.needs_log_domain() || reach > PLAIN_FLOAT_EXPONENT_LIMIT {
            return Err(RunError::OverflowRisk { reach });
        }
    }
    let mut rngs = OracleRngs::new(stream);
    let mut state = State::new(spec.algorithm, w1.to_vec(), spec.tie_break);
    let d = w1.len();
    let mut grad = vec![0.0; d];
    let mut w_prev = vec![0.0; d];
    for t in 1..=spec.horizon {
        w_prev.copy_from_slice(state.w());
        spec.objective.grad_into(&w_prev, &mut grad);
        let gns = numerics::norm_sq(&grad);
        if !gns.is_finite() {
            return Err(RunError::NonFinite {
                t,
                what: "gradient",
            });
        }
        let (g, draw) = spec.oracle.sample(&grad, &mut rngs, xi.map(|x| x[t - 1]));
        let outcome = state.step(&g);
        if !numerics::all_finite(state.w()) {
            return Err(RunError::NonFinite { t, what: "iterate" });
        }
        let (b_sq, momentum) = match &state {
            State::AdaGrad(s) => (s.b_sq, None),
            State::Sign(s) => (f64::NAN, Some(s.m.as_slice())),
            _ => (f64::NAN, None),
        };
        observe(&StepView {
            t,
            w: &w_prev,
            grad: &grad,
            grad_norm_sq: gns,
            g: &g,
            sgrad_norm_sq: numerics::norm_sq(&g),
            xi: draw.xi,
            step_len: outcome.step_len,
            b_sq,
            momentum,
            tie_break_used: outcome.tie_break_used,
            w_next: state.w(),
        });
    }
    Ok(())
}

/// Run a one-dimensional objective in the log domain.
pub fn simulate_log<F>(
    spec: &RunSpec,
    x1: f64,
    stream: &RngStream,
    xi: Option<&[f64]>,
    mut observe: F,
) -> Result<(), RunError>
where
    F: FnMut(&LogStepView),
{
    if spec.objective.dim() != 1 {
        return Err(RunError::InvalidParameter(
            "the log-domain runner needs a one-dimensional objective".into(),
        ));
    }
    check_inputs(spec, &[x1], xi)?;
    let mut rngs = OracleRngs::new(stream);
    let eta = spec.algorithm.eta();
    let tie = spec.tie_break.sign();
    let mut x = x1;
    let mut log_b_sq = match spec.algorithm {
        Algorithm::AdagradNorm { b0_sq, .. } => b0_sq.ln(),
        _ => f64::NAN,
    };
    let mut m = LogMagnitude::ZERO;
    for t in 1..=spec.horizon {
        let grad = spec.objective.grad_log(x);
        let (g, draw) = spec
            .oracle
            .sample_log(grad, &mut rngs, xi.map(|v| v[t - 1]));
        let mut tie_used = false;
        // Signed displacement u with x_{t+1} = x_t − u.
        let u = match spec.algorithm {
            Algorithm::AdagradNorm { .. } => {
                log_b_sq = numerics::log_sum_exp_accumulate(log_b_sq, g.log_sq());
                f64::from(g.sign) * eta * (g.log_abs - 0.5 * log_b_sq).exp()
            }
            Algorithm::Fixed { .. } => g.scale(eta).to_f64(),
            Algorithm::Normalized { gamma, .. } | Algorithm::Clipped { gamma, .. } => {
                if g.is_zero() && gamma == 0.0 {
                    tie_used = true;
                    tie * eta
                } else if g.is_zero() {
                    0.0
                } else {
                    let log_gamma = gamma.ln();
                    let log_denom = if matches!(spec.algorithm, Algorithm::Normalized { .. }) {
                        numerics::log_add_exp(log_gamma, g.log_abs)
                    } else {
                        log_gamma.max(g.log_abs)
                    };
                    f64::from(g.sign) * eta * (g.log_abs - log_denom).exp()
                }
            }
            Algorithm::SignMomentum { beta, .. } => {
                m = m.scale(beta).add(g.scale(1.0 - beta));
                if m.is_zero() {
                    tie_used = true;
                    tie * eta
                } else {
                    f64::from(m.sign) * eta
                }
            }
        };
        let x_next = x - u;
        if !x_next.is_finite() {
            return Err(RunError::NonFinite { t, what: "iterate" });
        }
        observe(&LogStepView {
            t,
            x,
            grad,
            g,
            xi: draw.xi,
            step_len: u.abs(),
            log_b_sq,
            momentum: matches!(spec.algorithm, Algorithm::SignMomentum { .. }).then_some(m),
            tie_break_used: tie_used,
            x_next,
        });
        x = x_next;
    }
    Ok(())
}

/// True when runs of this objective must use the log-domain path.
pub fn prefers_log_domain(obj: &Objective) -> bool {
    matches!(obj.spec, ObjectiveSpec::Exponential { .. })
}

/// Run one trajectory and record every step.
///
/// Exponential objectives always use the log-domain path. `xi`, when given,
/// replaces the oracle's multiplicative draws (for coupled runs).
pub fn run_trajectory(
    spec: &RunSpec,
    w1: &[f64],
    stream: &RngStream,
    xi: Option<&[f64]>,
) -> Result<TrajectoryRecord, RunError> {
    let t_cap = spec.horizon;
    let mut rec = TrajectoryRecord {
        algorithm: spec.algorithm.name().to_string(),
        log_domain: prefers_log_domain(spec.objective),
        dim: w1.len(),
        eta: spec.algorithm.eta(),
        b0_sq: match spec.algorithm {
            Algorithm::AdagradNorm { b0_sq, .. } => Some(b0_sq),
            _ => None,
        },
        w: Vec::with_capacity(t_cap),
        w_final: w1.to_vec(),
        grad_norm_sq: Vec::with_capacity(t_cap),
        sgrad_norm_sq: Vec::with_capacity(t_cap),
        xi: Vec::with_capacity(t_cap),
        step_len: Vec::with_capacity(t_cap),
        b_sq: Vec::new(),
        momentum: Vec::new(),
        tie_break_used: Vec::with_capacity(t_cap),
        min_grad_sq_so_far: Vec::with_capacity(t_cap),
    };
    let mut best = f64::INFINITY;
    if rec.log_domain {
        rec.b0_sq = rec.b0_sq.map(f64::ln);
        simulate_log(spec, w1[0], stream, xi, |v| {
            let gl = v.grad.log_sq();
            best = best.min(gl);
            rec.w.push(vec![v.x]);
            rec.grad_norm_sq.push(gl);
            rec.sgrad_norm_sq.push(v.g.log_sq());
            rec.xi.push(v.xi);
            rec.step_len.push(v.step_len);
            if !v.log_b_sq.is_nan() {
                rec.b_sq.push(v.log_b_sq);
            }
            if let Some(m) = v.momentum {
                rec.momentum.push(vec![m.to_f64()]);
            }
            rec.tie_break_used.push(v.tie_break_used);
            rec.min_grad_sq_so_far.push(best);
            rec.w_final = vec![v.x_next];
        })?;
    } else {
        simulate(spec, w1, stream, xi, |v| {
            best = best.min(v.grad_norm_sq);
            rec.w.push(v.w.to_vec());
            rec.grad_norm_sq.push(v.grad_norm_sq);
            rec.sgrad_norm_sq.push(v.sgrad_norm_sq);
            rec.xi.push(v.xi);
            rec.step_len.push(v.step_len);
            if !v.b_sq.is_nan() {
                rec.b_sq.push(v.b_sq);
            }
            if let Some(m) = v.momentum {
                rec.momentum.push(m.to_vec());
            }
            rec.tie_break_used.push(v.tie_break_used);
            rec.min_grad_sq_so_far.push(best);
            rec.w_final.copy_from_slice(v.w_next);
        })?;
    }
    Ok(rec)
}

// ---------------------------------------------------------------------------
// Per-trajectory invariants
// ---------------------------------------------------------------------------

/// Number of steps longer than `η + 1e−12`. Sign steps are measured per
/// component, every other rule by Euclidean length.
pub fn bounded_step_violations(rec: &TrajectoryRecord) -> usize {
    let sign = rec.algorithm
        == Algorithm::SignMomentum {
            eta: 0.0,
            beta: 0.0,
        }
        .name();
    (0..rec.len())
        .filter(|&i| {
            let a = rec.iterate(i);
            let b = rec.iterate(i + 1);
            let len = if sign {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            } else {
                numerics::dist(a, b)
            };
            len > rec.eta + 1e-12
        })
        .count()
}

/// Margin of the log-sum inequality
/// `Σ ‖g_t‖²/b_t² ≤ 1 + log(b_T²/b0²)`: returns `rhs − lhs` (nonnegative when it holds).
pub fn log_sum_margin(rec: &TrajectoryRecord) -> Option<f64> {
    let log_b0 = rec.log_b_prev_sq(0)?;
    let lhs = numerics::kahan_sum(
        (0..rec.len())
            .map(|i| (rec.log_sgrad_norm_sq(i) - rec.log_b_sq(i).unwrap_or(f64::NAN)).exp()),
    );
    let log_bt = rec.log_b_sq(rec.len() - 1)?;
    Some(1.0 + (log_bt - log_b0) - lhs)
}

/// Number of consecutive pairs violating
/// `‖∇F_t‖² ≤ 2η²L0² + 2(1+ηL1)²‖∇F_{t−1}‖²` (relative slack `1e−9`).
pub fn one_step_gradient_violations(rec: &TrajectoryRecord, l0: f64, l1: f64) -> usize {
    let eta = rec.eta;
    let log_a = (2.0 * eta * eta * l0 * l0).ln();
    let log_c = (2.0 * (1.0 + eta * l1) * (1.0 + eta * l1)).ln();
    (1..rec.len())
        .filter(|&i| {
            let rhs = numerics::log_add_exp(log_a, log_c + rec.log_grad_norm_sq(i - 1));
            rec.log_grad_norm_sq(i) > rhs + 1e-9
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::derive_stream;
    use crate::objectives::{make_exponential, make_quadratic};
    use crate::oracles::make_affine_oracle;

    #[test]
    fn adagrad_examples() {
        let mut s = AdaGradState {
            eta: 1.0,
            b_sq: 1.0,
            w: vec![0.0],
            t: 0,
        };
        let len = step_adagrad_norm(&mut s, &[3f64.sqrt()]);
        assert!((s.b_sq - 4.0).abs() < 1e-15);
        assert!((len - 0.8660).abs() < 1e-4);
        let before = s.clone();
        step_adagrad_norm(&mut s, &[0.0]);
        assert_eq!(s.w, before.w);
        assert_eq!(s.b_sq, before.b_sq);
        let mut s = AdaGradState {
            eta: 2.0,
            b_sq: 1.0,
            w: vec![0.0],
            t: 0,
        };
        let len = step_adagrad_norm(&mut s, &[1e3]);
        assert!((len - 2.0 * (1e6f64 / (1e6 + 1.0)).sqrt()).abs() < 1e-12);
        assert!(len <= 2.0);
    }

    #[test]
    fn fixed_examples() {
        let mut w = vec![0.0, 0.0];
        step_fixed(&mut w, &[1.0, -2.0], 0.1);
        assert_eq!(w, vec![-0.1, 0.2]);
        let mut w = vec![3.0];
        step_fixed(&mut w, &[0.0], 0.1);
        assert_eq!(w, vec![3.0]);
        assert!((gl13_step(1.0, 1.0, 0.5, 8) - 0.3536).abs() < 1e-4);
    }

    #[test]
    fn normalizer_examples() {
        let mut s = NormalizerState {
            eta: 0.5,
            gamma: 0.0,
            mode: NormalizerMode::Normalized,
            w: vec![0.0, 0.0],
            t: 0,
            tie_break: TieBreak::Plus,
        };
        let o = step_norm_or_clip(&mut s, &[3.0, 4.0]);
        assert!((o.step_len - 0.5).abs() < 1e-15);
        assert!((s.w[0] + 0.3).abs() < 1e-15 && (s.w[1] + 0.4).abs() < 1e-15);
        let o = step_norm_or_clip(&mut s, &[0.0, 0.0]);
        assert!(o.tie_break_used);

        let mut c = NormalizerState {
            eta: 1.0,
            gamma: 2.0,
            mode: NormalizerMode::Clipped,
            w: vec![0.0],
            t: 0,
            tie_break: TieBreak::Plus,
        };
        let o = step_norm_or_clip(&mut c, &[1.0]);
        assert_eq!(c.w, vec![-0.5]);
        assert_eq!(o.step_len, 0.5);
        let o = step_norm_or_clip(&mut c, &[10.0]);
        assert_eq!(o.step_len, 1.0);
    }

    #[test]
    fn sign_examples() {
        let mut s = SignMomentumState {
            eta: 0.1,
            beta: 0.0,
            m: vec![0.0],
            w: vec![0.0],
            t: 0,
            tie_break: TieBreak::Plus,
        };
        step_sign_momentum(&mut s, &[-3.0]);
        assert_eq!(s.w, vec![0.1]);
        let mut z = SignMomentumState {
            eta: 0.1,
            beta: 0.0,
            m: vec![0.0],
            w: vec![0.0],
            t: 0,
            tie_break: TieBreak::Plus,
        };
        let o = step_sign_momentum(&mut z, &[0.0]);
        assert!(o.tie_break_used);
        assert_eq!(z.w, vec![-0.1]);
    }

    #[test]
    fn fixed_step_one_shot_on_quadratic() {
        let f = make_quadratic(1.0, vec![0.0]).unwrap();
        let o = make_affine_oracle(0.0, 0.0, 0.0).unwrap();
        let spec = RunSpec {
            objective: &f,
            oracle: &o,
            algorithm: Algorithm::Fixed { eta: 1.0 },
            tie_break: TieBreak::Plus,
            horizon: 3,
        };
        let rec = run_trajectory(&spec, &[1.0], &derive_stream(0, 0), None).unwrap();
        assert_eq!(rec.w[1], vec![0.0]);
        assert_eq!(rec.grad_norm_sq, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn exponential_plain_mode_refused() {
        let f = make_exponential(1.0).unwrap();
        let o = make_affine_oracle(0.0, 0.0, 0.0).unwrap();
        let spec = RunSpec {
            objective: &f,
            oracle: &o,
            algorithm: Algorithm::AdagradNorm {
                eta: 1.0,
                b0_sq: 1.0,
            },
            tie_break: TieBreak::Plus,
            horizon: 10,
        };
        let err = simulate(&spec, &[0.0], &derive_stream(0, 0), None, |_| {});
        assert!(matches!(err, Err(RunError::OverflowRisk { .. })));
        assert!(run_trajectory(&spec, &[0.0], &derive_stream(0, 0), None).is_ok());
    }

    #[test]
    fn log_runner_matches_plain_on_quadratic() {
        let f = make_quadratic(1.3, vec![0.4]).unwrap();
        let o = make_affine_oracle(0.5, 1.5, 0.2).unwrap();
        for alg in [
            Algorithm::AdagradNorm {
                eta: 0.7,
                b0_sq: 0.3,
            },
            Algorithm::Normalized {
                eta: 0.2,
                gamma: 0.5,
            },
            Algorithm::Clipped {
                eta: 0.2,
                gamma: 0.5,
            },
            Algorithm::SignMomentum {
                eta: 0.1,
                beta: 0.6,
            },
        ] {
            let spec = RunSpec {
                objective: &f,
                oracle: &o,
                algorithm: alg,
                tie_break: TieBreak::Plus,
                horizon: 50,
            };
            let s = derive_stream(11, 3);
            let mut plain = Vec::new();
            simulate(&spec, &[2.0], &s, None, |v| plain.push(v.w_next[0])).unwrap();
            let mut logd = Vec::new();
            simulate_log(&spec, 2.0, &s, None, |v| logd.push(v.x_next)).unwrap();
            for (a, b) in plain.iter().zip(&logd) {
                assert!(
                    (a - b).abs() < 1e-9 * (1.0 + a.abs()),
                    "{alg:?}: {a} vs {b}"
                );
            }
        }
    }
}
