//! Dual activation functions: `mu_hat(rho) = E[mu(X) mu(Y)]` for standard
//! bivariate normal `(X, Y)` with correlation `rho`, plus the dual of the
//! derivative. These are the layer maps of the limiting-kernel recursion.
//!
//! Closed forms for the standardized activations:
//! - ReLU: `mu_hat(rho) = rho - (rho acos(rho) - sqrt(1 - rho^2)) / pi`,
//!   `mu_dot_hat(rho) = 1 - acos(rho) / pi`.
//! - cosine(omega): `mu_hat(rho) = cosh(omega^2 rho) / cosh(omega^2)`,
//!   `mu_dot_hat(rho) = omega^2 sinh(omega^2 rho) / cosh(omega^2)`.
//! - identity: `rho` and `1`.

use crate::net::Activation;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::NtkError;

/// Analytic dual of an activation and of its derivative, on `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct DualActivation {
    activation: Activation,
}

impl DualActivation {
    pub fn for_activation(activation: Activation) -> Result<Self, NtkError> {
        match activation {
            Activation::StandardizedRelu
            | Activation::StandardizedCosine { .. }
            | Activation::Identity => Ok(Self { activation }),
        }
    }

    /// `E[mu(X) mu(Y)]` at correlation `rho`.
    pub fn mu_hat(&self, rho: f64) -> f64 {
        let r = clamp_rho(rho);
        match self.activation {
            Activation::StandardizedRelu => {
                r - (r * r.acos() - (1.0 - r * r).sqrt()) / std::f64::consts::PI
            }
            Activation::StandardizedCosine { omega } => {
                let o2 = omega * omega;
                // cosh(o2 r)/cosh(o2) computed in log space to survive large omega
                stable_cosh_ratio(o2 * r, o2)
            }
            Activation::Identity => r,
        }
    }

    /// `E[mu'(X) mu'(Y)]` at correlation `rho`.
    pub fn mu_dot_hat(&self, rho: f64) -> f64 {
        let r = clamp_rho(rho);
        match self.activation {
            Activation::StandardizedRelu => 1.0 - r.acos() / std::f64::consts::PI,
            Activation::StandardizedCosine { omega } => {
                let o2 = omega * omega;
                o2 * stable_sinh_ratio(o2 * r, o2)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Correlations are clamped to `[-1, 1]` before entering the duals.
/// Rounding drifts past the endpoints by ~1e-16; finite random embeddings
/// overshoot the unit diagonal by their Monte-Carlo error, which is a few
/// percent at realistic dimensions. Anything beyond that indicates inputs
/// that were never normalized.
fn clamp_rho(rho: f64) -> f64 {
    debug_assert!(
        (-1.2..=1.2).contains(&rho),
        "correlation {rho} far outside [-1, 1]; inputs are not normalized"
    );
    rho.clamp(-1.0, 1.0)
}

/// `cosh(a) / cosh(b)` for `|a| <= b`, safe against overflow of `cosh`.
fn stable_cosh_ratio(a: f64, b: f64) -> f64 {
    let e = |t: f64| (t - b).exp();
    0.5 * (e(a) + e(-a)) / (0.5 * (e(b) + e(-b)))
}

/// `sinh(a) / cosh(b)` for `|a| <= b`.
fn stable_sinh_ratio(a: f64, b: f64) -> f64 {
    let e = |t: f64| (t - b).exp();
    0.5 * (e(a) - e(-a)) / (0.5 * (e(b) + e(-b)))
}

/// Monte-Carlo estimate of a dual together with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

fn monte_carlo_pair<F: Fn(f64) -> f64>(
    f: F,
    rho: f64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    assert!(rho.abs() <= 1.0, "correlation must lie in [-1, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = (1.0 - rho * rho).max(0.0).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let x: f64 = rng.sample(StandardNormal);
        let xp: f64 = rng.sample(StandardNormal);
        let y = rho * x + tail * xp;
        let v = f(x) * f(y);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    McEstimate {
        mean,
        std_err: (var / n).sqrt(),
    }
}

/// Unbiased Monte-Carlo estimate of `E[mu(X) mu(Y)]`, the sampling oracle for
/// the analytic duals. `Y = rho X + sqrt(1 - rho^2) X'` with `X, X'` i.i.d.
/// standard normal.
pub fn monte_carlo_dual(
    activation: Activation,
    rho: f64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    monte_carlo_pair(|x| activation.apply(x), rho, samples, seed)
}

/// Monte-Carlo estimate of the derivative dual `E[mu'(X) mu'(Y)]`.
pub fn monte_carlo_dual_dot(
    activation: Activation,
    rho: f64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    monte_carlo_pair(|x| activation.deriv(x), rho, samples, seed)
}
