//! Certified objective functions and sampling-based certifiers.
//!
//! Every objective carries a [`SmoothnessCert`] for the gradient-form
//! generalized smoothness condition
//! `‖∇F(w) − ∇F(w′)‖ ≤ (L0 + L1‖∇F(w′)‖)‖w − w′‖` whenever `‖w − w′‖ ≤ 1/L1`,
//! and optionally a [`PolyBoundCert`] for
//! `‖∇F(w)‖ − c_k‖∇F(w′)‖ ≤ max{c_k′‖w − w′‖^{k−1}, L0‖w − w′‖}`.
//! The certifiers sample point pairs and report the first violating pair.

use crate::numerics::{self, derive_stream, LogMagnitude, SUBSTREAM_SETUP};
use crate::optimizers::TrajectoryRecord;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// Multiplicative slack applied to every certified inequality.
pub const CERT_SLACK: f64 = 1.0 + 1e-9;

/// Errors raised while building or checking objectives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("invalid objective parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: objective has d = {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("growth envelope needs eta <= 1/L1, got eta = {eta}, L1 = {l1}")]
    StepTooLarge { eta: f64, l1: f64 },
    #[error("operation needs a one-dimensional objective")]
    NotOneDimensional,
}

/// Claimed constants for gradient-form `(L0, L1)`-smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCert {
    pub l0: f64,
    pub l1: f64,
}

/// Claimed constants for `k`-polynomial boundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyBoundCert {
    pub k: u32,
    pub c_k: f64,
    pub c_k_prime: f64,
    pub l0: f64,
}

/// Parameters describing a member of the objective zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// `(L0/2)‖w − w*‖²`.
    Quadratic { l0: f64, minimizer: Vec<f64> },
    /// `½ Σ_i λ_i (w_i − w*_i)²` with per-coordinate curvatures `λ_i`.
    ScaledQuadratic {
        curvatures: Vec<f64>,
        minimizer: Vec<f64>,
    },
    /// `‖w − w*‖^k`.
    Monomial {
        k: u32,
        l1: f64,
        minimizer: Vec<f64>,
    },
    /// `exp(L1 x)` on the real line.
    Exponential { l1: f64 },
    /// `(L0/2) x² exp(L1 x) − L0 x / L1` on the real line.
    CompositeGrowth { l0: f64, l1: f64 },
}

/// An objective with exact gradients and certified constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub spec: ObjectiveSpec,
    pub smoothness: SmoothnessCert,
    pub poly: Option<PolyBoundCert>,
    /// Constants `(L0, L1)` for the Hessian form `|F''| ≤ L0 + L1|F'|`,
    /// present for one-dimensional objectives.
    pub hessian: Option<(f64, f64)>,
    pub f_star: f64,
}

/// Root of `e^u (u + u²/2) = 1`, the scaled minimizer of the composite objective.
const COMPOSITE_U_STAR: f64 = 0.491_225_183_544_473_9;

fn check_positive(name: &str, v: f64) -> Result<(), ObjectiveError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_point(name: &str, w: &[f64]) -> Result<(), ObjectiveError> {
    if w.is_empty() || !numerics::all_finite(w) {
        Err(ObjectiveError::InvalidParameter(format!(
            "{name} must be a nonempty finite vector"
        )))
    } else {
        Ok(())
    }
}

/// `F(w) = (L0/2)‖w − w*‖²` with certificate `(L0, 0)` and poly-bound `(2, 1, L0)`.
///
/// ```
/// use gensmooth::objectives::make_quadratic;
///
/// let f = make_quadratic(2.0, vec![1.0, 1.0]).unwrap();
/// assert!((f.value(&[0.0, 0.0]) - 2.0).abs() < 1e-15);
/// assert_eq!(f.grad(&[0.0, 0.0]), vec![-2.0, -2.0]);
/// ```
pub fn make_quadratic(l0: f64, minimizer: Vec<f64>) -> Result<Objective, ObjectiveError> {
    check_positive("L0", l0)?;
    check_point("minimizer", &minimizer)?;
    let d = minimizer.len();
    Ok(Objective {
        spec: ObjectiveSpec::Quadratic { l0, minimizer },
        smoothness: SmoothnessCert { l0, l1: 0.0 },
        poly: Some(PolyBoundCert {
            k: 2,
            c_k: 1.0,
            c_k_prime: l0,
            l0,
        }),
        hessian: (d == 1).then_some((l0, 0.0)),
        f_star: 0.0,
    })
}

/// `F(w) = ½ Σ λ_i (w_i − w*_i)²`, certified with `L0 = max λ_i`.
pub fn make_scaled_quadratic(
    curvatures: Vec<f64>,
    minimizer: Vec<f64>,
) -> Result<Objective, ObjectiveError> {
    check_point("minimizer", &minimizer)?;
    if curvatures.len() != minimizer.len() {
        return Err(ObjectiveError::DimensionMismatch {
            expected: minimizer.len(),
            got: curvatures.len(),
        });
    }
    for &c in &curvatures {
        check_positive("curvature", c)?;
    }
    let l0 = curvatures.iter().copied().fold(0.0, f64::max);
    let d = minimizer.len();
    Ok(Objective {
        spec: ObjectiveSpec::ScaledQuadratic {
            curvatures,
            minimizer,
        },
        smoothness: SmoothnessCert { l0, l1: 0.0 },
        poly: Some(PolyBoundCert {
            k: 2,
            c_k: 1.0,
            c_k_prime: l0,
            l0,
        }),
        hessian: (d == 1).then_some((l0, 0.0)),
        f_star: 0.0,
    })
}

/// Curvatures spaced log-uniformly from `l0` down to `l0 * ratio`.
pub fn log_spaced_curvatures(d: usize, l0: f64, ratio: f64) -> Vec<f64> {
    if d == 1 {
        return vec![l0];
    }
    (0..d)
        .map(|i| l0 * ratio.powf(i as f64 / (d - 1) as f64))
        .collect()
}

/// `F(w) = ‖w − w*‖^k` with certificate `(2k(k−1)/L1^{k−2}, (e−1)(k−1)L1)`
/// and poly-bound constants `c_k = 2^{k−2}`, `c_k′ = k·2^{k−2}`.
///
/// ```
/// use gensmooth::objectives::make_monomial;
///
/// let f = make_monomial(4, 1.0, vec![0.0]).unwrap();
/// let p = f.poly.unwrap();
/// assert_eq!((p.c_k, p.c_k_prime), (4.0, 16.0));
/// ```
pub fn make_monomial(k: u32, l1: f64, minimizer: Vec<f64>) -> Result<Objective, ObjectiveError> {
    if k < 2 {
        return Err(ObjectiveError::InvalidParameter(format!(
            "monomial degree must be at least 2, got {k}"
        )));
    }
    check_positive("L1", l1)?;
    check_point("minimizer", &minimizer)?;
    let kf = f64::from(k);
    let l0 = 2.0 * kf * (kf - 1.0) / l1.powi(k as i32 - 2);
    let c_k = 2f64.powi(k as i32 - 2);
    let d = minimizer.len();
    Ok(Objective {
        spec: ObjectiveSpec::Monomial { k, l1, minimizer },
        smoothness: SmoothnessCert {
            l0,
            l1: (E - 1.0) * (kf - 1.0) * l1,
        },
        poly: Some(PolyBoundCert {
            k,
            c_k,
            c_k_prime: kf * c_k,
            l0,
        }),
        hessian: (d == 1).then_some((l0 / 2.0, (kf - 1.0) * l1)),
        f_star: 0.0,
    })
}

/// `F(x) = exp(L1 x)` with certificate `(0, (e−1)L1)` and no poly-bound.
///
/// ```
/// use gensmooth::objectives::make_exponential;
///
/// let f = make_exponential(2.0).unwrap();
/// let g = f.grad_log(500.0);
/// assert_eq!(g.sign, 1);
/// assert!((g.log_abs - (2f64.ln() + 1000.0)).abs() < 1e-12);
/// ```
pub fn make_exponential(l1: f64) -> Result<Objective, ObjectiveError> {
    check_positive("L1", l1)?;
    Ok(Objective {
        spec: ObjectiveSpec::Exponential { l1 },
        smoothness: SmoothnessCert {
            l0: 0.0,
            l1: (E - 1.0) * l1,
        },
        poly: None,
        hessian: Some((0.0, l1)),
        f_star: 0.0,
    })
}

/// `F(x) = (L0/2) x² exp(L1 x) − L0 x / L1` with certificate
/// `(2(2 + e^{√2}) L0, 2(e − 1) L1)`.
pub fn make_composite_growth(l0: f64, l1: f64) -> Result<Objective, ObjectiveError> {
    check_positive("L0", l0)?;
    check_positive("L1", l1)?;
    let u = COMPOSITE_U_STAR;
    let hess_l0 = (2.0 + 2f64.sqrt().exp()) * l0;
    Ok(Objective {
        spec: ObjectiveSpec::CompositeGrowth { l0, l1 },
        smoothness: SmoothnessCert {
            l0: 2.0 * hess_l0,
            l1: 2.0 * (E - 1.0) * l1,
        },
        poly: None,
        hessian: Some((hess_l0, 2.0 * l1)),
        f_star: (l0 / (l1 * l1)) * (0.5 * u * u * u.exp() - u),
    })
}

impl Objective {
    /// Build the objective described by a spec, attaching its shipped certificates.
    pub fn from_spec(spec: &ObjectiveSpec) -> Result<Objective, ObjectiveError> {
        match spec.clone() {
            ObjectiveSpec::Quadratic { l0, minimizer } => make_quadratic(l0, minimizer),
            ObjectiveSpec::ScaledQuadratic {
                curvatures,
                minimizer,
            } => make_scaled_quadratic(curvatures, minimizer),
            ObjectiveSpec::Monomial { k, l1, minimizer } => make_monomial(k, l1, minimizer),
            ObjectiveSpec::Exponential { l1 } => make_exponential(l1),
            ObjectiveSpec::CompositeGrowth { l0, l1 } => make_composite_growth(l0, l1),
        }
    }

    /// Short human-readable name.
    pub fn name(&self) -> &'static str {
        match self.spec {
            ObjectiveSpec::Quadratic { .. } => "quadratic",
            ObjectiveSpec::ScaledQuadratic { .. } => "scaled-quadratic",
            ObjectiveSpec::Monomial { .. } => "monomial",
            ObjectiveSpec::Exponential { .. } => "exponential",
            ObjectiveSpec::CompositeGrowth { .. } => "composite-growth",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.spec {
            ObjectiveSpec::Quadratic { minimizer, .. }
            | ObjectiveSpec::ScaledQuadratic { minimizer, .. }
            | ObjectiveSpec::Monomial { minimizer, .. } => minimizer.len(),
            ObjectiveSpec::Exponential { .. } | ObjectiveSpec::CompositeGrowth { .. } => 1,
        }
    }

    /// True for objectives whose gradients must be handled in the log domain.
    pub fn needs_log_domain(&self) -> bool {
        matches!(self.spec, ObjectiveSpec::Exponential { .. })
    }

    /// The `L1` constant that controls exponential growth, if any.
    pub fn growth_rate(&self) -> Option<f64> {
        match self.spec {
            ObjectiveSpec::Exponential { l1 } | ObjectiveSpec::CompositeGrowth { l1, .. } => {
                Some(l1)
            }
            _ => None,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match &self.spec {
            ObjectiveSpec::Quadratic { l0, minimizer } => {
                0.5 * l0 * numerics::dist(w, minimizer).powi(2)
            }
            ObjectiveSpec::ScaledQuadratic {
                curvatures,
                minimizer,
            } => {
                0.5 * w
                    .iter()
                    .zip(minimizer)
                    .zip(curvatures)
                    .map(|((x, m), c)| c * (x - m) * (x - m))
                    .sum::<f64>()
            }
            ObjectiveSpec::Monomial { k, minimizer, .. } => {
                numerics::dist(w, minimizer).powi(*k as i32)
            }
            ObjectiveSpec::Exponential { l1 } => (l1 * w[0]).exp(),
            ObjectiveSpec::CompositeGrowth { l0, l1 } => {
                let x = w[0];
                0.5 * l0 * x * x * (l1 * x).exp() - l0 * x / l1
            }
        }
    }

    /// Write `∇F(w)` into `out`.
    pub fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        match &self.spec {
            ObjectiveSpec::Quadratic { l0, minimizer } => {
                for ((o, x), m) in out.iter_mut().zip(w).zip(minimizer) {
                    *o = l0 * (x - m);
                }
            }
            ObjectiveSpec::ScaledQuadratic {
                curvatures,
                minimizer,
            } => {
                for (((o, x), m), c) in out.iter_mut().zip(w).zip(minimizer).zip(curvatures) {
                    *o = c * (x - m);
                }
            }
            ObjectiveSpec::Monomial { k, minimizer, .. } => {
                let r = numerics::dist(w, minimizer);
                let scale = if *k == 2 {
                    2.0
                } else if r == 0.0 {
                    0.0
                } else {
                    f64::from(*k) * r.powi(*k as i32 - 2)
                };
                for ((o, x), m) in out.iter_mut().zip(w).zip(minimizer) {
                    *o = scale * (x - m);
                }
            }
            ObjectiveSpec::Exponential { l1 } => out[0] = l1 * (l1 * w[0]).exp(),
            ObjectiveSpec::CompositeGrowth { l0, l1 } => {
                let x = w[0];
                out[0] = l0 * (l1 * x).exp() * (x + 0.5 * l1 * x * x) - l0 / l1;
            }
        }
    }

    /// `∇F(w)` as a new vector.
    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        self.grad_into(w, &mut g);
        g
    }

    /// The derivative of a one-dimensional objective as a [`LogMagnitude`],
    /// finite even where the float value overflows.
    pub fn grad_log(&self, x: f64) -> LogMagnitude {
        match self.spec {
            ObjectiveSpec::Exponential { l1 } => LogMagnitude::new(1, l1.ln() + l1 * x),
            ObjectiveSpec::CompositeGrowth { l0, l1 } => {
                let poly = LogMagnitude::from_f64(x + 0.5 * l1 * x * x);
                let growth = poly.mul(LogMagnitude::new(1, l0.ln() + l1 * x));
                growth.add(LogMagnitude::from_f64(-l0 / l1))
            }
            _ => LogMagnitude::from_f64(self.grad(&[x])[0]),
        }
    }

    /// `log ‖∇F(w)‖²`, using the log-domain path for one-dimensional objectives.
    pub fn log_grad_norm_sq(&self, w: &[f64]) -> f64 {
        if self.dim() == 1 {
            self.grad_log(w[0]).log_sq()
        } else {
            numerics::norm_sq(&self.grad(w)).ln()
        }
    }
}

// ---------------------------------------------------------------------------
// Certifiers
// ---------------------------------------------------------------------------

/// Distribution over point pairs used by the certifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairSampler {
    /// `w` uniform in `[lo, hi]^d`, direction uniform on the sphere, and
    /// distance uniform in `(0, max_dist]`.
    Uniform {
        dim: usize,
        lo: f64,
        hi: f64,
        max_dist: f64,
    },
    /// Deterministic one-dimensional walk: `w′ = anchor`, `w = anchor + start·factor^i`
    /// until the offset exceeds `limit`.
    OutwardWalk {
        anchor: f64,
        start: f64,
        factor: f64,
        limit: f64,
    },
}

impl PairSampler {
    /// The local sampler for a smoothness certificate: distances up to `1/L1`
    /// (or `fallback` when `L1 = 0`).
    pub fn local(dim: usize, lo: f64, hi: f64, l1: f64, fallback: f64) -> Self {
        let max_dist = if l1 > 0.0 { 1.0 / l1 } else { fallback };
        PairSampler::Uniform {
            dim,
            lo,
            hi,
            max_dist,
        }
    }

    fn dim(&self) -> usize {
        match self {
            PairSampler::Uniform { dim, .. } => *dim,
            PairSampler::OutwardWalk { .. } => 1,
        }
    }

    fn pair_count(&self, n_pairs: usize) -> usize {
        match *self {
            PairSampler::Uniform { .. } => n_pairs,
            PairSampler::OutwardWalk {
                start,
                factor,
                limit,
                ..
            } => {
                let mut n = 0;
                let mut off = start;
                while off <= limit {
                    n += 1;
                    off *= factor;
                }
                n
            }
        }
    }

    /// The `i`-th pair, reproducible from `seed`.
    fn pair(&self, seed: u64, i: usize) -> (Vec<f64>, Vec<f64>) {
        match *self {
            PairSampler::Uniform {
                dim,
                lo,
                hi,
                max_dist,
            } => {
                let mut rng = derive_stream(seed, i as u64).rng(SUBSTREAM_SETUP);
                let w: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..=hi)).collect();
                let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = numerics::norm(&dir);
                dir.iter_mut().for_each(|x| *x /= n);
                let r = max_dist * (1.0 - rng.random::<f64>());
                let wp = w.iter().zip(&dir).map(|(x, u)| x + r * u).collect();
                (w, wp)
            }
            PairSampler::OutwardWalk {
                anchor,
                start,
                factor,
                ..
            } => {
                let off = start * factor.powi(i as i32);
                (vec![anchor + off], vec![anchor])
            }
        }
    }
}

/// A violating pair reported by a certifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `"linear"` when `lhs`/`rhs` are plain values, `"log"` when they are
    /// natural logarithms of magnitudes that overflow `f64`.
    pub scale: String,
}

/// Outcome of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub claim: String,
    pub n_pairs: usize,
    pub pass: bool,
    pub witness: Option<Witness>,
}

/// One side of a certified inequality, kept in the log domain so that
/// exponential objectives compare without overflow.
struct Sides {
    lhs: LogMagnitude,
    rhs: LogMagnitude,
}

impl Sides {
    fn holds(&self) -> bool {
        if self.lhs.sign <= 0 {
            return true;
        }
        if self.rhs.sign <= 0 {
            return false;
        }
        self.lhs.log_abs <= self.rhs.log_abs + CERT_SLACK.ln()
    }

    fn witness(&self, w: Vec<f64>, w_prime: Vec<f64>) -> Witness {
        let (l, r) = (self.lhs.to_f64(), self.rhs.to_f64());
        if l.is_finite() && r.is_finite() {
            Witness {
                w,
                w_prime,
                lhs: l,
                rhs: r,
                scale: "linear".into(),
            }
        } else {
            let signed_log = |m: LogMagnitude| match m.sign {
                0 => f64::MIN,
                s => f64::from(s) * m.log_abs,
            };
            Witness {
                w,
                w_prime,
                lhs: signed_log(self.lhs),
                rhs: signed_log(self.rhs),
                scale: "log".into(),
            }
        }
    }
}

/// Gradient of `obj` at `w` as log magnitudes per component.
fn grad_components(obj: &Objective, w: &[f64]) -> Vec<LogMagnitude> {
    if obj.dim() == 1 {
        vec![obj.grad_log(w[0])]
    } else {
        obj.grad(w)
            .into_iter()
            .map(LogMagnitude::from_f64)
            .collect()
    }
}

fn log_norm(v: &[LogMagnitude]) -> LogMagnitude {
    let log_sq = v.iter().fold(f64::NEG_INFINITY, |acc, c| {
        numerics::log_add_exp(acc, c.log_sq())
    });
    LogMagnitude::new(1, 0.5 * log_sq)
}

fn smooth_sides(obj: &Objective, l0: f64, l1: f64, w: &[f64], wp: &[f64]) -> Sides {
    let g = grad_components(obj, w);
    let gp = grad_components(obj, wp);
    let diff: Vec<LogMagnitude> = g.iter().zip(&gp).map(|(a, b)| a.add(b.neg())).collect();
    let lhs = log_norm(&diff);
    let r = LogMagnitude::from_f64(numerics::dist(w, wp));
    let rhs = LogMagnitude::from_f64(l0)
        .add(log_norm(&gp).scale(l1))
        .mul(r);
    Sides { lhs, rhs }
}

fn poly_sides(
    obj: &Objective,
    k: u32,
    c_k: f64,
    c_k_prime: f64,
    l0: f64,
    w: &[f64],
    wp: &[f64],
) -> Sides {
    let g = log_norm(&grad_components(obj, w));
    let gp = log_norm(&grad_components(obj, wp));
    let lhs = g.add(gp.scale(-c_k));
    let r = numerics::dist(w, wp);
    let rhs = (c_k_prime * r.powi(k as i32 - 1)).max(l0 * r);
    Sides {
        lhs,
        rhs: LogMagnitude::from_f64(rhs),
    }
}

fn run_certifier<F>(
    claim: String,
    sampler: &PairSampler,
    n_pairs: usize,
    seed: u64,
    sides: F,
) -> CertReport
where
    F: Fn(&[f64], &[f64]) -> Sides + Sync,
{
    let n = sampler.pair_count(n_pairs);
    let first_bad = (0..n).into_par_iter().find_first(|&i| {
        let (w, wp) = sampler.pair(seed, i);
        !(sides(&w, &wp).holds() && sides(&wp, &w).holds())
    });
    let witness = first_bad.map(|i| {
        let (w, wp) = sampler.pair(seed, i);
        let s = sides(&w, &wp);
        if s.holds() {
            sides(&wp, &w).witness(wp, w)
        } else {
            s.witness(w, wp)
        }
    });
    CertReport {
        claim,
        n_pairs: n,
        pass: witness.is_none(),
        witness,
    }
}

/// Check gradient-form `(L0, L1)`-smoothness on sampled pairs.
///
/// Each sampled pair is checked in both orders.
pub fn certify_generalized_smooth(
    obj: &Objective,
    l0: f64,
    l1: f64,
    sampler: &PairSampler,
    n_pairs: usize,
    seed: u64,
) -> Result<CertReport, ObjectiveError> {
    if sampler.dim() != obj.dim() {
        return Err(ObjectiveError::DimensionMismatch {
            expected: obj.dim(),
            got: sampler.dim(),
        });
    }
    if let PairSampler::Uniform { max_dist, .. } = sampler {
        if l1 > 0.0 && *max_dist > 1.0 / l1 * CERT_SLACK {
            return Err(ObjectiveError::InvalidParameter(format!(
                "sampler distance {max_dist} exceeds 1/L1 = {}",
                1.0 / l1
            )));
        }
    }
    let claim = format!("{} is ({l0}, {l1})-smooth", obj.name());
    Ok(run_certifier(claim, sampler, n_pairs, seed, |w, wp| {
        smooth_sides(obj, l0, l1, w, wp)
    }))
}

/// Check `k`-polynomial boundedness on sampled pairs (no distance restriction).
pub fn certify_poly_bounded(
    obj: &Objective,
    cert: PolyBoundCert,
    sampler: &PairSampler,
    n_pairs: usize,
    seed: u64,
) -> Result<CertReport, ObjectiveError> {
    if cert.k < 2 || cert.c_k < 1.0 || cert.c_k_prime <= 0.0 {
        return Err(ObjectiveError::InvalidParameter(format!(
            "poly-bound needs k >= 2, c_k >= 1, c_k' > 0, got {cert:?}"
        )));
    }
    if sampler.dim() != obj.dim() {
        return Err(ObjectiveError::DimensionMismatch {
            expected: obj.dim(),
            got: sampler.dim(),
        });
    }
    let claim = format!(
        "{} is {}-polynomially bounded with c_k = {}, c_k' = {}, L0 = {}",
        obj.name(),
        cert.k,
        cert.c_k,
        cert.c_k_prime,
        cert.l0
    );
    Ok(run_certifier(claim, sampler, n_pairs, seed, |w, wp| {
        poly_sides(obj, cert.k, cert.c_k, cert.c_k_prime, cert.l0, w, wp)
    }))
}

/// `L0` used for every cell of the poly-bound falsification grid.
pub const FALSIFICATION_L0: f64 = 100.0;

/// Try every cell of the grid `k ∈ {2..6}`, `c_k, c_k′ ∈ {1, 10, 100}` by
/// walking outward from the origin geometrically up to `x = 10⁴`.
///
/// Returns one report per cell; a cell "passes" only if no witness was found.
pub fn falsify_poly_bounded_grid(obj: &Objective) -> Result<Vec<CertReport>, ObjectiveError> {
    if obj.dim() != 1 {
        return Err(ObjectiveError::NotOneDimensional);
    }
    let walk = PairSampler::OutwardWalk {
        anchor: 0.0,
        start: 1e-2,
        factor: 1.25,
        limit: 1e4,
    };
    let grid = [1.0, 10.0, 100.0];
    let mut reports = Vec::new();
    for k in 2..=6 {
        for &c_k in &grid {
            for &c_k_prime in &grid {
                let cert = PolyBoundCert {
                    k,
                    c_k,
                    c_k_prime,
                    l0: FALSIFICATION_L0,
                };
                reports.push(certify_poly_bounded(obj, cert, &walk, 0, 0)?);
            }
        }
    }
    Ok(reports)
}

/// Default box for sampling points of a zoo objective.
pub fn default_box(obj: &Objective) -> (f64, f64) {
    match obj.spec {
        ObjectiveSpec::Quadratic { .. } | ObjectiveSpec::ScaledQuadratic { .. } => (-10.0, 10.0),
        ObjectiveSpec::Monomial { .. } => (-5.0, 5.0),
        ObjectiveSpec::Exponential { l1 } => (-20.0 / l1, 20.0 / l1),
        ObjectiveSpec::CompositeGrowth { l1, .. } => (-8.0 / l1, 4.0 / l1),
    }
}

/// Certify the objective's own shipped smoothness and poly-bound claims.
pub fn certify_shipped(
    obj: &Objective,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<CertReport>, ObjectiveError> {
    let (lo, hi) = default_box(obj);
    let SmoothnessCert { l0, l1 } = obj.smoothness;
    let local = PairSampler::local(obj.dim(), lo, hi, l1, hi - lo);
    let mut out = vec![certify_generalized_smooth(
        obj, l0, l1, &local, n_pairs, seed,
    )?];
    if let Some(cert) = obj.poly {
        let wide = PairSampler::Uniform {
            dim: obj.dim(),
            lo,
            hi,
            max_dist: hi - lo,
        };
        out.push(certify_poly_bounded(obj, cert, &wide, n_pairs, seed ^ 1)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pointwise checks
// ---------------------------------------------------------------------------

/// Relative error (with a unit floor on the denominator) between the
/// analytic gradient and central differences with `h = 1e−5·(1 + |x|)`.
pub fn gradient_fd_error(obj: &Objective, w: &[f64]) -> f64 {
    let g = obj.grad(w);
    let mut fd = vec![0.0; w.len()];
    let mut p = w.to_vec();
    for i in 0..w.len() {
        let h = 1e-5 * (1.0 + w[i].abs());
        p[i] = w[i] + h;
        let fp = obj.value(&p);
        p[i] = w[i] - h;
        let fm = obj.value(&p);
        p[i] = w[i];
        fd[i] = (fp - fm) / (2.0 * h);
    }
    numerics::dist(&g, &fd) / numerics::norm(&g).max(1.0)
}

/// Local smoothness descent inequality
/// `F(w + d) ≤ F(w) + ⟨∇F(w), d⟩ + ((L0 + L1‖∇F(w)‖)/2)‖d‖²`
/// with the shipped certificate, allowing relative rounding slack.
pub fn check_local_descent(obj: &Objective, w: &[f64], d: &[f64]) -> bool {
    let SmoothnessCert { l0, l1 } = obj.smoothness;
    let g = obj.grad(w);
    let f = obj.value(w);
    let wd: Vec<f64> = w.iter().zip(d).map(|(a, b)| a + b).collect();
    let lhs = obj.value(&wd);
    let lin = numerics::dot(&g, d);
    let quad = 0.5 * (l0 + l1 * numerics::norm(&g)) * numerics::norm_sq(d);
    let rhs = f + lin + quad;
    lhs <= rhs + 1e-9 * (f.abs() + lin.abs() + quad.abs() + lhs.abs())
}

/// Hessian-form check `|F''(x)| ≤ L0 + L1|F'(x)|` for one-dimensional
/// objectives, with `F''` from central differences of the analytic gradient.
pub fn check_hessian_form(obj: &Objective, x: f64) -> Result<bool, ObjectiveError> {
    let (hl0, hl1) = obj.hessian.ok_or(ObjectiveError::NotOneDimensional)?;
    let h = 1e-5 * (1.0 + x.abs());
    let gp = obj.grad(&[x + h])[0];
    let gm = obj.grad(&[x - h])[0];
    let second = (gp - gm) / (2.0 * h);
    let bound = hl0 + hl1 * obj.grad(&[x])[0].abs();
    Ok(second.abs() <= bound * (1.0 + 1e-6) + 1e-9)
}

/// Growth envelope
/// `‖∇F_t‖ − (1+ηL1)^{t−t′}‖∇F_{t′}‖ ≤ ((1+ηL1)^{t−t′} − 1)·L0/L1` for all `t > t′`
/// along a trajectory, evaluated in the log domain.
pub fn check_growth_envelope(
    traj: &TrajectoryRecord,
    l0: f64,
    l1: f64,
    eta: f64,
) -> Result<bool, ObjectiveError> {
    if l1 > 0.0 && eta > 1.0 / l1 * CERT_SLACK {
        return Err(ObjectiveError::StepTooLarge { eta, l1 });
    }
    let logs: Vec<f64> = (0..traj.len())
        .map(|i| 0.5 * traj.log_grad_norm_sq(i))
        .collect();
    Ok(growth_envelope_holds(&logs, l0, l1, eta))
}

/// The envelope check on a sequence of `log ‖∇F_t‖` values.
pub fn growth_envelope_holds(log_grad_norms: &[f64], l0: f64, l1: f64, eta: f64) -> bool {
    let log_rate = (eta * l1).ln_1p();
    for t in 1..log_grad_norms.len() {
        let now = LogMagnitude::new(1, log_grad_norms[t]);
        for (tp, &before) in log_grad_norms[..t].iter().enumerate() {
            let gap = (t - tp) as f64;
            let growth = LogMagnitude::new(1, gap * log_rate + before);
            let additive = if l1 > 0.0 {
                (gap * log_rate).exp_m1() * l0 / l1
            } else {
                gap * eta * l0
            };
            let excess = now.add(growth.neg());
            let sides = Sides {
                lhs: excess,
                rhs: LogMagnitude::from_f64(additive),
            };
            if !sides.holds() {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        let f = make_quadratic(1.0, vec![0.0]).unwrap();
        assert_eq!(f.value(&[-1.0]), 0.5);
        assert_eq!(f.grad(&[-1.0]), vec![-1.0]);
        assert_eq!(f.grad(&[0.0]), vec![0.0]);
        let f = make_quadratic(2.0, vec![1.0, 1.0]).unwrap();
        assert!((f.value(&[0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(f.grad(&[0.0, 0.0]), vec![-2.0, -2.0]);
        let p = f.poly.unwrap();
        assert_eq!((p.k, p.c_k, p.c_k_prime), (2, 1.0, 2.0));
    }

    #[test]
    fn monomial_examples() {
        let f = make_monomial(3, 1.0, vec![0.0]).unwrap();
        assert_eq!(f.value(&[2.0]), 8.0);
        assert_eq!(f.grad(&[2.0])[0].abs(), 12.0);
        let f2 = make_monomial(2, 1.0, vec![0.0, 0.0]).unwrap();
        let p = f2.poly.unwrap();
        assert_eq!((p.c_k, p.c_k_prime), (1.0, 2.0));
        assert_eq!(f2.value(&[3.0, 4.0]), 25.0);
        assert_eq!(f2.grad(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn exponential_log_gradient() {
        let f = make_exponential(1.0).unwrap();
        let g = f.grad_log(0.0);
        assert_eq!((g.sign, g.log_abs), (1, 0.0));
        assert!(f.poly.is_none());
        assert!(((f.smoothness.l1) - (E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn composite_examples() {
        let f = make_composite_growth(1.0, 1.0).unwrap();
        assert_eq!(f.value(&[0.0]), 0.0);
        assert_eq!(f.grad(&[0.0])[0], -1.0);
        let g1 = f.grad(&[1.0])[0];
        assert!((g1 - (E + E / 2.0 - 1.0)).abs() < 1e-12);
        assert!((g1 - 3.0774).abs() < 1e-4);
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            assert!(gradient_fd_error(&f, &[x]) <= 1e-5);
        }
        // The minimizer solves e^u (u + u^2/2) = 1 with u = L1 x.
        let u = COMPOSITE_U_STAR;
        assert!((u.exp() * (u + 0.5 * u * u) - 1.0).abs() < 1e-14);
        let f2 = make_composite_growth(3.0, 2.0).unwrap();
        let xs = u / 2.0;
        assert!(f2.grad(&[xs])[0].abs() < 1e-12);
        assert!((f2.value(&[xs]) - f2.f_star).abs() < 1e-12);
    }

    #[test]
    fn composite_log_gradient_agrees() {
        let f = make_composite_growth(1.5, 0.7).unwrap();
        for x in [-3.0, -0.2, 0.0, 0.4, 2.5, 10.0] {
            let plain = f.grad(&[x])[0];
            let lg = f.grad_log(x).to_f64();
            assert!((plain - lg).abs() <= 1e-10 * plain.abs().max(1.0), "{x}");
        }
        assert!(f.grad_log(2000.0).log_abs.is_finite());
    }

    #[test]
    fn envelope_detects_jump() {
        let logs = vec![0.0, 0.0, 10.0];
        assert!(!growth_envelope_holds(&logs, 1.0, 1.0, 0.5));
        assert!(growth_envelope_holds(&[0.0, 0.0, 0.0], 1.0, 1.0, 0.5));
    }

    #[test]
    fn envelope_l1_zero_limit() {
        // With L1 = 0 the additive term is eta * L0 * (t - t').
        assert!(growth_envelope_holds(&[0.0, 2f64.ln()], 1.0, 0.0, 1.0));
        assert!(!growth_envelope_holds(&[0.0, 2.01f64.ln()], 1.0, 0.0, 1.0));
    }
}
