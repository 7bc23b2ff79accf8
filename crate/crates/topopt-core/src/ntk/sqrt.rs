//! Spectral square root of the full-torus limiting kernel.
//!
//! On the extended grid that covers the whole torus the limiting-kernel Gram
//! matrix is a 2D circulant, so its eigenvalues are the 2D DFT of its stencil
//! and the positive square root is again a circulant whose stencil is the
//! inverse DFT of the square-rooted spectrum. That square root is the
//! explicit density filter the network method implicitly applies.

use super::dual::DualActivation;
use super::{theta_recursion, NtkError};
use crate::fft2::{fft2_real, ifft2_real};
use crate::net::NetworkConfig;
use rustfft::num_complex::Complex64;

/// Square-root convolution stencil on the extended `n x n` torus grid,
/// together with the kernel stencil it squares back to. Stencils are
/// row-major over offsets: entry `dy * n + dx` is the value at grid offset
/// `(dx, dy)`, both cyclic.
#[derive(Debug, Clone)]
pub struct SqrtFilter {
    pub n: usize,
    pub delta: f64,
    /// Limiting-kernel stencil `K(offset)`.
    pub kernel: Vec<f64>,
    /// Square-root stencil `g(offset)`, `g * g = K` under cyclic convolution.
    pub stencil: Vec<f64>,
}

/// Build the square-root filter of the limiting kernel for a torus-embedded
/// network over an `nx x ny` design grid. The grid is extended to
/// `n = 4 max(nx, ny)` points per axis with `delta = 2 pi / n` so the
/// embedding covers the full torus and the Gram matrix is exactly circulant.
pub fn torus_sqrt_filter(
    config: &NetworkConfig,
    nx: usize,
    ny: usize,
) -> Result<SqrtFilter, NtkError> {
    let n = 4 * nx.max(ny).max(1);
    let delta = 2.0 * std::f64::consts::PI / n as f64;
    let dual = DualActivation::for_activation(config.activation)?;
    let beta2 = config.beta * config.beta;
    let alpha2 = 1.0 - beta2;
    let depth = config.depth();
    // Torus embedding with r = sqrt(2) into n0 = 4: the normalized inner
    // product of two embedded points at offset (dx, dy) is
    // (cos(delta dx) + cos(delta dy)) / 2.
    let mut kernel = vec![0.0; n * n];
    for dy in 0..n {
        for dx in 0..n {
            let rho1 = beta2
                + alpha2 * 0.5 * ((delta * dx as f64).cos() + (delta * dy as f64).cos());
            kernel[dy * n + dx] = theta_recursion(&dual, alpha2, beta2, depth, rho1);
        }
    }
    sqrt_of_stencil(kernel, n, delta)
}

/// Spectral square root of an arbitrary cyclic stencil (exposed for tests:
/// any PSD circulant works, not just the torus kernel).
pub(crate) fn sqrt_of_stencil(
    kernel: Vec<f64>,
    n: usize,
    delta: f64,
) -> Result<SqrtFilter, NtkError> {
    let spec = fft2_real(&kernel, n, n);
    let max_re = spec.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    let min_re = spec.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if min_re < -1e-6 * max_re.abs() {
        return Err(NtkError::NegativeSpectrum {
            min: min_re,
            max: max_re,
        });
    }
    let sqrt_spec: Vec<Complex64> = spec
        .iter()
        .map(|c| Complex64::new(c.re.max(0.0).sqrt(), 0.0))
        .collect();
    let stencil = ifft2_real(&sqrt_spec, n, n);
    Ok(SqrtFilter {
        n,
        delta,
        kernel,
        stencil,
    })
}

impl SqrtFilter {
    /// Reorder a stencil so offset (0, 0) sits at the image center
    /// (for rendering).
    pub fn shifted(&self, which: &[f64]) -> Vec<f64> {
        assert_eq!(which.len(), self.n * self.n);
        let n = self.n;
        let h = n / 2;
        let mut out = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                out[((y + h) % n) * n + ((x + h) % n)] = which[y * n + x];
            }
        }
        out
    }
}
