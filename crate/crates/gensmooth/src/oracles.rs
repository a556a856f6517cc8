//! Affine-variance stochastic gradient oracles.
//!
//! The oracle returns `g = a + ξ·∇F(w)`, where `ξ` takes the value
//! `hi = 1 + σ1²/(1+ε)` with probability `δ = 1/(1 + σ1²/(1+ε)²)` and `−ε`
//! otherwise, and `a ~ N(0, (σ0²/d)·I)`. Then `E[ξ] = 1`, `E[ξ²] = 1 + σ1²`,
//! and `E‖g − ∇F‖² = σ0² + σ1²‖∇F‖²` holds with equality. Averaging `B`
//! independent draws divides both variance terms by `B`.

use crate::numerics::{self, Estimate, LogMagnitude, RngStream, SUBSTREAM_ADDITIVE, SUBSTREAM_XI};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Errors raised by oracle construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid oracle parameter: {0}")]
    InvalidParameter(String),
}

/// Serializable oracle configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub sigma0: f64,
    pub sigma1: f64,
    pub eps: f64,
    #[serde(rename = "minibatch_B", default = "one")]
    pub minibatch_b: usize,
}

fn one() -> usize {
    1
}

/// The two-point multiplicative oracle with Gaussian additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineOracle {
    pub sigma0: f64,
    pub sigma1: f64,
    pub eps: f64,
    /// Probability of the large factor `hi`.
    pub delta: f64,
    /// The large factor `1 + σ1²/(1+ε)`.
    pub hi: f64,
    /// Number of averaged draws per call.
    pub minibatch: usize,
}

/// The noise realized by one oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    /// Realized multiplicative factor (the batch mean when `B > 1`).
    pub xi: f64,
    pub additive: Vec<f64>,
}

/// Generators for the two independent noise sources of one replicate.
#[derive(Debug, Clone)]
pub struct OracleRngs {
    pub xi: ChaCha8Rng,
    pub additive: ChaCha8Rng,
}

impl OracleRngs {
    pub fn new(stream: &RngStream) -> Self {
        Self {
            xi: stream.rng(SUBSTREAM_XI),
            additive: stream.rng(SUBSTREAM_ADDITIVE),
        }
    }
}

/// Build the oracle with derived `(δ, hi)`.
///
/// ```
/// use gensmooth::oracles::make_affine_oracle;
///
/// let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
/// assert_eq!((o.delta, o.hi), (0.2, 5.0));
/// ```
pub fn make_affine_oracle(sigma0: f64, sigma1: f64, eps: f64) -> Result<AffineOracle, OracleError> {
    for (name, v) in [("sigma0", sigma0), ("sigma1", sigma1), ("eps", eps)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(OracleError::InvalidParameter(format!(
                "{name} must be nonnegative and finite, got {v}"
            )));
        }
    }
    let delta = 1.0 / (1.0 + sigma1 * sigma1 / ((1.0 + eps) * (1.0 + eps)));
    let hi = 1.0 + sigma1 * sigma1 / (1.0 + eps);
    Ok(AffineOracle {
        sigma0,
        sigma1,
        eps,
        delta,
        hi,
        minibatch: 1,
    })
}

/// Smallest batch size `⌈σ1²/(1−ε)²⌉` that brings the effective `σ1` to at most `1 − ε`.
pub fn minibatch_size_for(sigma1: f64, eps: f64) -> usize {
    ((sigma1 * sigma1) / ((1.0 - eps) * (1.0 - eps)))
        .ceil()
        .max(1.0) as usize
}

/// Average `b` independent draws per call.
///
/// ```
/// use gensmooth::oracles::{make_affine_oracle, minibatch_size_for, minibatch_wrap};
///
/// let b = minibatch_size_for(3.0, 0.5);
/// assert_eq!(b, 36);
/// let o = minibatch_wrap(make_affine_oracle(1.0, 3.0, 0.0).unwrap(), b).unwrap();
/// assert!((o.effective_sigma1() - 0.5).abs() < 1e-15);
/// ```
pub fn minibatch_wrap(oracle: AffineOracle, b: usize) -> Result<AffineOracle, OracleError> {
    if b == 0 {
        return Err(OracleError::InvalidParameter(
            "minibatch size must be at least 1".into(),
        ));
    }
    Ok(AffineOracle {
        minibatch: oracle.minibatch * b,
        ..oracle
    })
}

impl AffineOracle {
    pub fn from_config(cfg: &OracleConfig) -> Result<AffineOracle, OracleError> {
        minibatch_wrap(
            make_affine_oracle(cfg.sigma0, cfg.sigma1, cfg.eps)?,
            cfg.minibatch_b,
        )
    }

    pub fn config(&self) -> OracleConfig {
        OracleConfig {
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            eps: self.eps,
            minibatch_b: self.minibatch,
        }
    }

    /// Effective additive standard deviation after batching.
    pub fn effective_sigma0(&self) -> f64 {
        self.sigma0 / (self.minibatch as f64).sqrt()
    }

    /// Effective multiplicative standard deviation after batching.
    pub fn effective_sigma1(&self) -> f64 {
        self.sigma1 / (self.minibatch as f64).sqrt()
    }

    /// Draw one multiplicative factor.
    pub fn draw_xi<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.sigma1 == 0.0 {
            return 1.0;
        }
        if rng.random::<f64>() < self.delta {
            self.hi
        } else {
            -self.eps
        }
    }

    /// Draw the (batch-averaged) multiplicative factor.
    pub fn draw_batch_xi<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.minibatch == 1 {
            return self.draw_xi(rng);
        }
        let s: f64 = (0..self.minibatch).map(|_| self.draw_xi(rng)).sum();
        s / self.minibatch as f64
    }

    /// Pre-draw `t` batch-averaged factors, as used by coupled runs.
    pub fn draw_xi_sequence<R: Rng>(&self, rng: &mut R, t: usize) -> Vec<f64> {
        (0..t).map(|_| self.draw_batch_xi(rng)).collect()
    }

    /// Draw the additive noise vector of dimension `d`.
    pub fn draw_additive<R: Rng>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        if self.sigma0 == 0.0 {
            return vec![0.0; d];
        }
        let sd = self.sigma0 / ((d * self.minibatch) as f64).sqrt();
        (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect()
    }

    /// Sample `g = a + ξ·∇F` at a point whose true gradient is `grad`.
    ///
    /// If `xi` is given it replaces the drawn factor, which lets coupled
    /// runs replay one factor sequence across algorithms.
    pub fn sample(
        &self,
        grad: &[f64],
        rngs: &mut OracleRngs,
        xi: Option<f64>,
    ) -> (Vec<f64>, NoiseDraw) {
        let xi = xi.unwrap_or_else(|| self.draw_batch_xi(&mut rngs.xi));
        let additive = self.draw_additive(&mut rngs.additive, grad.len());
        let g = additive.iter().zip(grad).map(|(a, d)| a + xi * d).collect();
        (g, NoiseDraw { xi, additive })
    }

    /// Log-domain sample for one-dimensional objectives.
    pub fn sample_log(
        &self,
        grad: LogMagnitude,
        rngs: &mut OracleRngs,
        xi: Option<f64>,
    ) -> (LogMagnitude, NoiseDraw) {
        let xi = xi.unwrap_or_else(|| self.draw_batch_xi(&mut rngs.xi));
        let additive = self.draw_additive(&mut rngs.additive, 1);
        let g = LogMagnitude::from_f64(additive[0]).add(grad.scale(xi));
        (g, NoiseDraw { xi, additive })
    }

    /// Support points and probabilities of the batch-averaged factor.
    pub fn xi_distribution(&self) -> Vec<(f64, f64)> {
        if self.sigma1 == 0.0 {
            return vec![(1.0, 1.0)];
        }
        let b = self.minibatch;
        let mut out = Vec::with_capacity(b + 1);
        let mut log_choose = 0.0;
        for j in 0..=b {
            if j > 0 {
                log_choose += ((b - j + 1) as f64).ln() - (j as f64).ln();
            }
            let logp =
                log_choose + j as f64 * self.delta.ln() + (b - j) as f64 * (1.0 - self.delta).ln();
            let value = (j as f64 * self.hi - (b - j) as f64 * self.eps) / b as f64;
            let p = if self.delta >= 1.0 {
                f64::from(u8::from(j == b))
            } else {
                logp.exp()
            };
            out.push((value, p));
        }
        out
    }
}

/// Gauss–Hermite nodes and weights (physicists' convention) for `n` points.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GH_FINE: usize = 160;
const GH_COARSE: usize = 80;
const INNER_MC_SAMPLES: usize = 200_000;

fn gh_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static FINE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static COARSE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    if n == GH_FINE {
        FINE.get_or_init(|| gauss_hermite(GH_FINE))
    } else {
        COARSE.get_or_init(|| gauss_hermite(GH_COARSE))
    }
}

/// `E[f(m + s·Z)]` for standard normal `Z` with an `n`-point rule.
fn gh_expect(n: usize, m: f64, s: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gh_rule(n);
    let acc: f64 = x
        .iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(m + s * std::f64::consts::SQRT_2 * xi))
        .sum();
    acc / std::f64::consts::PI.sqrt()
}

/// `E[‖g‖²/(b_prev² + ‖g‖²)]` at a point with `‖∇F‖² = grad_norm_sq`.
///
/// Exact when `σ0 = 0`, Gauss–Hermite quadrature when `d = 1`, and an inner
/// Monte Carlo average (fixed internal seed) when `d > 1`. The returned SE is
/// zero for the exact case, the coarse/fine quadrature gap for `d = 1`, and
/// the Monte Carlo standard error otherwise.
///
/// ```
/// use gensmooth::oracles::{conditional_second_moment_ratio, make_affine_oracle};
///
/// let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
/// let r = conditional_second_moment_ratio(&o, 1.0, 1.0, 1);
/// assert!((r.value - 5.0 / 26.0).abs() < 1e-15);
/// ```
pub fn conditional_second_moment_ratio(
    oracle: &AffineOracle,
    grad_norm_sq: f64,
    b_prev_sq: f64,
    dim: usize,
) -> Estimate {
    let gn = grad_norm_sq.sqrt();
    let xis = oracle.xi_distribution();
    let ratio = |q: f64| q / (b_prev_sq + q);
    if oracle.sigma0 == 0.0 {
        let value = xis
            .iter()
            .map(|&(x, p)| p * ratio(x * x * grad_norm_sq))
            .sum();
        return Estimate {
            value,
            se: 0.0,
            n: xis.len(),
        };
    }
    let sd = oracle.sigma0 / ((dim * oracle.minibatch) as f64).sqrt();
    if dim == 1 {
        let at = |n: usize| -> f64 {
            xis.iter()
                .map(|&(x, p)| p * gh_expect(n, x * gn, sd, |z| ratio(z * z)))
                .sum()
        };
        let fine = at(GH_FINE);
        let coarse = at(GH_COARSE);
        return Estimate {
            value: fine,
            se: (fine - coarse).abs(),
            n: GH_FINE,
        };
    }
    // By rotation invariance only the gradient norm matters: put ∇F on the
    // first axis and draw the remaining d − 1 coordinates as one chi-square.
    let mut rng = numerics::derive_stream(0x5EED_0C0D, dim as u64).rng(0);
    let mut acc = numerics::RunningMoments::new();
    for _ in 0..INNER_MC_SAMPLES {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let rest: f64 = (1..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * z
            })
            .sum();
        let v: f64 = xis
            .iter()
            .map(|&(x, p)| {
                let a0 = sd * z0 + x * gn;
                p * ratio(a0 * a0 + sd * sd * rest)
            })
            .sum();
        acc.push(v);
    }
    acc.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::derive_stream;

    #[test]
    fn derived_constants() {
        let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
        assert_eq!(o.delta, 0.2);
        assert_eq!(o.hi, 5.0);
        let o = make_affine_oracle(0.0, 0.0, 0.3).unwrap();
        assert_eq!((o.delta, o.hi), (1.0, 1.0));
        let o = make_affine_oracle(0.0, 4.0, 2f64.sqrt()).unwrap();
        assert!((o.delta - 0.2670).abs() < 5e-5);
    }

    #[test]
    fn noiseless_sample_is_exact() {
        let o = make_affine_oracle(0.0, 0.0, 0.0).unwrap();
        let mut r = OracleRngs::new(&derive_stream(1, 2));
        let (g, d) = o.sample(&[1.5, -2.0], &mut r, None);
        assert_eq!(g, vec![1.5, -2.0]);
        assert_eq!(d.xi, 1.0);
    }

    #[test]
    fn two_point_support() {
        let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
        let mut r = OracleRngs::new(&derive_stream(3, 0));
        let mut hits = 0;
        for _ in 0..20_000 {
            let (g, _) = o.sample(&[1.0], &mut r, None);
            assert!(g[0] == 0.0 || g[0] == 5.0);
            hits += usize::from(g[0] == 5.0);
        }
        let p = hits as f64 / 20_000.0;
        assert!((p - 0.2).abs() < 4.0 * (0.2f64 * 0.8 / 20_000.0).sqrt());
    }

    #[test]
    fn xi_distribution_moments() {
        for b in [1, 3, 7] {
            let o = minibatch_wrap(make_affine_oracle(0.0, 2.5, 0.4).unwrap(), b).unwrap();
            let d = o.xi_distribution();
            let total: f64 = d.iter().map(|p| p.1).sum();
            let m1: f64 = d.iter().map(|p| p.0 * p.1).sum();
            let m2: f64 = d.iter().map(|p| p.0 * p.0 * p.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!((m1 - 1.0).abs() < 1e-12);
            let var = 2.5f64 * 2.5 / b as f64;
            assert!((m2 - (1.0 + var)).abs() < 1e-10, "b={b}: {m2}");
        }
    }

    #[test]
    fn ratio_zero_gradient_noiseless() {
        let o = make_affine_oracle(0.0, 2.0, 0.0).unwrap();
        assert_eq!(conditional_second_moment_ratio(&o, 0.0, 1.0, 3).value, 0.0);
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let (x, w) = gauss_hermite(GH_FINE);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        assert!((m0 - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }
}
