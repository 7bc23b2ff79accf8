//! Tangent-kernel Gram matrices and their analysis: the empirical kernel of a
//! finite network, the deterministic infinite-width limit computed by the
//! dual-activation recursion, radial kernel profiles with their half-maximum
//! radius, symmetric spectra, and the FFT square root of the torus kernel.

mod dual;
mod profile;
mod sqrt;

pub use dual::{monte_carlo_dual, monte_carlo_dual_dot, DualActivation, McEstimate};
pub use profile::{half_max_radius, profile_gaussian, profile_torus, KernelProfile};
pub use sqrt::{torus_sqrt_filter, SqrtFilter};

#[cfg(test)]
pub(crate) use sqrt::sqrt_of_stencil;

use crate::net::{backward, forward, jacobian_rows, NetError, NetworkConfig, NetworkParams};
use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NtkError {
    #[error("no analytic dual activation registered for this activation")]
    UnknownDual,
    #[error("matrix of size {n} exceeds the full-eigendecomposition cap of {cap}")]
    SizeExceeded { n: usize, cap: usize },
    #[error("requested {k} eigenpairs from a matrix of size {n}")]
    CountExceedsSize { k: usize, n: usize },
    #[error("kernel profile is constant within 1e-12; half-maximum radius undefined")]
    DegenerateProfile,
    #[error("kernel spectrum has negative mass {min:.3e} (max {max:.3e}); expected PSD")]
    NegativeSpectrum { min: f64, max: f64 },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Provenance of a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Empirical,
    Limiting,
    SquaredFilter,
}

/// Symmetric positive semi-definite `N x N` Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub g: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wrap a Gram matrix, folding floating-point asymmetry away.
    pub fn new(kind: KernelKind, g: DMatrix<f64>) -> Self {
        assert_eq!(g.nrows(), g.ncols(), "Gram matrix must be square");
        let mut g = g;
        for i in 0..g.nrows() {
            for j in (i + 1)..g.ncols() {
                let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Self { kind, g }
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn frobenius(&self) -> f64 {
        self.g.iter().map(|&v| v * v).sum::<f64>().sqrt()
    }

    /// `|A - B|_F / |B|_F` with `self` as `A`.
    pub fn rel_frobenius_distance(&self, other: &KernelMatrix) -> f64 {
        assert_eq!(self.n(), other.n(), "size mismatch");
        let num: f64 = self
            .g
            .iter()
            .zip(other.g.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        num / other.frobenius()
    }
}

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// Shared pool for data-parallel Gram fills. `TOPOPT_THREADS` caps the worker
/// count; unset means one worker per core.
pub(crate) fn pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("TOPOPT_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build thread pool")
    })
}

/// Gram matrix `J J^T` of explicit jacobian rows.
pub fn empirical_ntk(jacobian: &Array2<f64>) -> KernelMatrix {
    let gram = jacobian.dot(&jacobian.t());
    let n = gram.nrows();
    KernelMatrix::new(
        KernelKind::Empirical,
        DMatrix::from_fn(n, n, |i, j| gram[(i, j)]),
    )
}

/// Empirical NTK via [`crate::net::jacobian_rows`]; refuses to materialize
/// jacobians above `budget` entries.
pub fn empirical_ntk_from_net(
    params: &NetworkParams,
    config: &NetworkConfig,
    z: &Array2<f64>,
    budget: usize,
) -> Result<KernelMatrix, NtkError> {
    let jac = jacobian_rows(params, config, z, budget)?;
    Ok(empirical_ntk(&jac))
}

/// Empirical NTK by layer-wise contraction, algebraically identical to
/// `J J^T` but never materializing the jacobian:
/// `Theta = sum_l [(alpha^2 / n_l) A^l (A^l)^T + beta^2] .* D^{l+1} (D^{l+1})^T`
/// where `D^{l+1}` are the output sensitivities to layer preactivations.
pub fn empirical_ntk_direct(
    params: &NetworkParams,
    config: &NetworkConfig,
    z: &Array2<f64>,
) -> Result<KernelMatrix, NtkError> {
    let (_, cache) = forward(params, config, z)?;
    let n = z.nrows();
    let alpha = config.alpha();
    let beta2 = config.beta * config.beta;
    let depth = config.depth();
    let mut theta = Array2::<f64>::zeros((n, n));
    // sensitivities of the scalar output w.r.t. layer-(l+1) preactivations
    let mut d = Array2::<f64>::ones((n, 1));
    for l in (0..depth).rev() {
        let a = &cache.activations[l];
        let feature = a.dot(&a.t());
        let sens = d.dot(&d.t());
        let scale = alpha * alpha / config.layer_sizes[l] as f64;
        theta
            .iter_mut()
            .zip(feature.iter().zip(sens.iter()))
            .for_each(|(t, (&f, &s))| *t += (scale * f + beta2) * s);
        if l > 0 {
            let scale_l = alpha / (config.layer_sizes[l] as f64).sqrt();
            let mut back = d.dot(&params.weights[l]);
            back.mapv_inplace(|v| v * scale_l);
            let deriv = cache.preacts[l - 1].mapv(|v| config.activation.deriv(v));
            d = back * &deriv;
        }
    }
    Ok(KernelMatrix::new(
        KernelKind::Empirical,
        DMatrix::from_fn(n, n, |i, j| theta[(i, j)]),
    ))
}

/// The scalar limiting-kernel recursion: starting from the first-layer
/// covariance `rho1`, iterate
/// `rho_{l+1} = beta^2 + alpha^2 mu_hat(rho_l)` and
/// `theta_{l+1} = alpha^2 mu_dot_hat(rho_l) theta_l + rho_{l+1}`
/// up to `depth` affine layers, returning `theta_depth`.
pub(crate) fn theta_recursion(
    dual: &DualActivation,
    alpha2: f64,
    beta2: f64,
    depth: usize,
    rho1: f64,
) -> f64 {
    let mut rho = rho1;
    let mut theta = rho1;
    for _ in 1..depth {
        let rho_next = beta2 + alpha2 * dual.mu_hat(rho);
        theta = alpha2 * dual.mu_dot_hat(rho) * theta + rho_next;
        rho = rho_next;
    }
    theta
}

/// Limiting (infinite-width) NTK Gram matrix on the embedded inputs. Assumes
/// inputs normalized so the diagonal covariance is 1, which standardized
/// activations with `alpha^2 + beta^2 = 1` preserve; first-layer correlations
/// are clamped to `[-1, 1]` before entering the duals.
pub fn limiting_ntk(config: &NetworkConfig, z: &Array2<f64>) -> Result<KernelMatrix, NtkError> {
    let dual = DualActivation::for_activation(config.activation)?;
    if z.ncols() != config.input_dim() {
        return Err(NtkError::Net(NetError::ShapeMismatch(format!(
            "inputs have {} columns, network expects {}",
            z.ncols(),
            config.input_dim()
        ))));
    }
    let n = z.nrows();
    let alpha2 = 1.0 - config.beta * config.beta;
    let beta2 = config.beta * config.beta;
    let depth = config.depth();
    let n0 = config.input_dim() as f64;
    let zzt = z.dot(&z.t());
    let mut g = DMatrix::<f64>::zeros(n, n);
    pool().install(|| {
        let cols = n;
        g.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(j, col)| {
                // nalgebra stores column-major: chunk j is column j
                for (i, out) in col.iter_mut().enumerate() {
                    let rho1 = beta2 + alpha2 * zzt[(i, j)] / n0;
                    *out = theta_recursion(&dual, alpha2, beta2, depth, rho1);
                }
            });
    });
    Ok(KernelMatrix::new(KernelKind::Limiting, g))
}

/// Top-`k` eigenpairs of a Gram matrix, eigenvalues descending. Eigenvectors
/// come back in element ordering; reshape against the grid for images.
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Cap on the full symmetric eigendecomposition.
pub const SPECTRUM_SIZE_CAP: usize = 4096;

pub fn spectrum(kernel: &KernelMatrix, k: usize) -> Result<Spectrum, NtkError> {
    let n = kernel.n();
    if n > SPECTRUM_SIZE_CAP {
        return Err(NtkError::SizeExceeded {
            n,
            cap: SPECTRUM_SIZE_CAP,
        });
    }
    if k > n {
        return Err(NtkError::CountExceedsSize { k, n });
    }
    let eig = kernel.g.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
        .collect();
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Mean-square row check used by tests and the torus pipeline: every row of a
/// circulant Gram is a cyclic 2D shift of row 0.
pub fn max_circulant_deviation(kernel: &KernelMatrix, n_side: usize) -> f64 {
    assert_eq!(kernel.n(), n_side * n_side, "grid size mismatch");
    let g = &kernel.g;
    let mut worst = 0.0_f64;
    for by in 0..n_side {
        for bx in 0..n_side {
            let row = by * n_side + bx;
            for jy in 0..n_side {
                for jx in 0..n_side {
                    let col = jy * n_side + jx;
                    // corresponding entry in row 0 under the cyclic shift
                    let sx = (jx + n_side - bx) % n_side;
                    let sy = (jy + n_side - by) % n_side;
                    let base = g[(0, sy * n_side + sx)];
                    worst = worst.max((g[(row, col)] - base).abs());
                }
            }
        }
    }
    worst
}

// Re-export the evolution-operator check building blocks for tests.
pub use crate::net::DEFAULT_JACOBIAN_BUDGET;

/// Apply the Gram operator to a vector through the network-gradient path:
/// `Theta v = J (J^T v)` realized as a backward pass followed by a
/// directional forward difference. Exact only for parameter-affine networks
/// (identity activation, depth 1); used to validate the operator algebra.
pub fn ntk_apply_via_gradients(
    params: &NetworkParams,
    config: &NetworkConfig,
    z: &Array2<f64>,
    v: &[f64],
) -> Result<Vec<f64>, NtkError> {
    let (_, cache) = forward(params, config, z)?;
    let g = backward(params, config, &cache, v);
    // J w for affine-in-parameter networks equals f(theta + w) - f(theta)
    let theta = params.flatten();
    let w = g.flatten();
    let shifted: Vec<f64> = theta.iter().zip(&w).map(|(&t, &d)| t + d).collect();
    let p2 = NetworkParams::from_flat(config, &shifted)?;
    let (f1, _) = forward(params, config, z)?;
    let (f2, _) = forward(&p2, config, z)?;
    Ok(f2.iter().zip(&f1).map(|(&a, &b)| a - b).collect())
}

#[cfg(test)]
mod tests;
