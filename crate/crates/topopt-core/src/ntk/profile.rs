//! Radial kernel profiles and the half-maximum filter radius.
//!
//! With a spatially invariant embedding the limiting kernel is (close to) a
//! function of distance alone, `Phi(|p - p'|)`. Since these kernels have no
//! compact support, the usable filter size is the radius where the profile
//! falls halfway from its peak to its infimum over the scanned range.

use super::dual::DualActivation;
use super::{theta_recursion, NtkError};
use crate::net::Activation;

/// A radial kernel profile `r -> Phi(r)` with the hyperparameters that
/// produced it.
pub struct KernelProfile {
    pub label: String,
    /// Suggested scan range for radius searches.
    pub scan_max: f64,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl KernelProfile {
    pub fn new(
        label: impl Into<String>,
        scan_max: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            scan_max,
            f: Box::new(f),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }
}

impl std::fmt::Debug for KernelProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelProfile")
            .field("label", &self.label)
            .field("scan_max", &self.scan_max)
            .finish()
    }
}

/// Profile of the Gaussian-embedding network (one hidden standardized-ReLU
/// layer): the first-layer covariance is
/// `G(d) = beta^2 + (1 - beta^2) exp(-d^2 / (2 ell^2))` and the kernel shape
/// is `Phi(d) = r_hat(G) + G r_dot_hat(G)` with the ReLU duals. The omitted
/// second-layer affine factors only rescale and shift the profile, which
/// leaves the half-maximum radius unchanged.
pub fn profile_gaussian(beta: f64, ell: f64) -> KernelProfile {
    assert!((0.0..1.0).contains(&beta), "beta must lie in [0, 1)");
    assert!(ell > 0.0, "length scale must be positive");
    let dual = DualActivation::for_activation(Activation::StandardizedRelu)
        .expect("relu dual exists");
    let beta2 = beta * beta;
    KernelProfile::new(
        format!("gaussian(beta={beta}, ell={ell})"),
        10.0 * ell,
        move |d: f64| {
            let g = beta2 + (1.0 - beta2) * (-d * d / (2.0 * ell * ell)).exp();
            dual.mu_hat(g) + g * dual.mu_dot_hat(g)
        },
    )
}

/// Profile of the torus-embedding network (two hidden standardized-cosine
/// layers, then the output layer) along the grid diagonal: the first-layer
/// covariance at per-coordinate offset `r` is
/// `beta^2 + (1 - beta^2) cos(delta r)` and deeper layers follow the
/// dual-activation recursion. Valid for `r` in `[0, pi / delta]`.
pub fn profile_torus(beta: f64, omega: f64, delta: f64) -> KernelProfile {
    assert!((0.0..1.0).contains(&beta), "beta must lie in [0, 1)");
    assert!(omega > 0.0 && delta > 0.0, "omega and delta must be positive");
    let dual = DualActivation::for_activation(Activation::StandardizedCosine { omega })
        .expect("cosine dual exists");
    let beta2 = beta * beta;
    let alpha2 = 1.0 - beta2;
    KernelProfile::new(
        format!("torus(beta={beta}, omega={omega}, delta={delta})"),
        std::f64::consts::PI / delta,
        move |r: f64| {
            let rho1 = beta2 + alpha2 * (delta * r).cos();
            theta_recursion(&dual, alpha2, beta2, 3, rho1)
        },
    )
}

/// Smallest radius where the profile reaches the midpoint between its peak
/// `Phi(0)` and its infimum over `[0, scan_max]`: dense 1000-point scan, then
/// bisection to 1e-10.
pub fn half_max_radius(profile: &KernelProfile, scan_max: f64) -> Result<f64, NtkError> {
    assert!(scan_max > 0.0, "scan range must be positive");
    const SCAN_POINTS: usize = 1000;
    let step = scan_max / SCAN_POINTS as f64;
    let values: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| profile.eval(i as f64 * step))
        .collect();
    let peak = values[0];
    let inf = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if peak - inf < 1e-12 {
        return Err(NtkError::DegenerateProfile);
    }
    let half = 0.5 * (peak + inf);
    let cross = values
        .iter()
        .position(|&v| v <= half)
        .expect("infimum is below the half level");
    if cross == 0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = ((cross - 1) as f64 * step, cross as f64 * step);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if profile.eval(mid) <= half {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
