//! Fully-connected networks under NTK parameterization.
//!
//! Preactivations follow `a~^{l+1} = (alpha / sqrt(n_l)) W^l a^l + beta b^l`
//! with all weights and biases i.i.d. standard normal at initialization and
//! `alpha^2 + beta^2 = 1`. Activations are standardized so a unit-variance
//! preactivation keeps unit variance: `sqrt(2) max(0, x)` for ReLU and
//! `lambda(omega) cos(omega x)` with `lambda = sqrt(2 / (1 + exp(-2 omega^2)))`
//! for the cosine. Everything is 64-bit; the kernel-convergence tests are too
//! tight for single precision.

use ndarray::{Array1, Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "jacobian of {rows} outputs x {params} parameters exceeds the budget of {budget} \
         entries; subsample the inputs or raise the budget"
    )]
    BudgetExceeded {
        rows: usize,
        params: usize,
        budget: usize,
    },
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
}

/// Standardized nonlinearities (unit second moment under a standard normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    StandardizedRelu,
    StandardizedCosine { omega: f64 },
    Identity,
}

impl Activation {
    /// Scale putting the cosine at unit second moment.
    pub fn cosine_lambda(omega: f64) -> f64 {
        (2.0 / (1.0 + (-2.0 * omega * omega).exp())).sqrt()
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::StandardizedRelu => std::f64::consts::SQRT_2 * x.max(0.0),
            Activation::StandardizedCosine { omega } => {
                Self::cosine_lambda(omega) * (omega * x).cos()
            }
            Activation::Identity => x,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Activation::StandardizedRelu => {
                if x > 0.0 {
                    std::f64::consts::SQRT_2
                } else {
                    0.0
                }
            }
            Activation::StandardizedCosine { omega } => {
                -Self::cosine_lambda(omega) * omega * (omega * x).sin()
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture and initialization description. `layer_sizes` runs from the
/// input dimension to the scalar output: `(n0, n1, ..., n_{L-1}, 1)`.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub beta: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(
        layer_sizes: Vec<usize>,
        beta: f64,
        activation: Activation,
        seed: u64,
    ) -> Result<Self, NetError> {
        if layer_sizes.len() < 2 {
            return Err(NetError::InvalidConfig(
                "need at least an input and an output layer".into(),
            ));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(NetError::InvalidConfig(format!(
                "output layer must have size 1, got {}",
                layer_sizes.last().unwrap()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(NetError::InvalidConfig("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(NetError::InvalidConfig(format!(
                "beta must lie in [0, 1), got {beta}"
            )));
        }
        if let Activation::StandardizedCosine { omega } = activation {
            if !(omega > 0.0) {
                return Err(NetError::InvalidConfig(format!(
                    "omega must be positive, got {omega}"
                )));
            }
        }
        Ok(Self {
            layer_sizes,
            beta,
            activation,
            seed,
        })
    }

    /// Weight scale enforcing `alpha^2 + beta^2 = 1`.
    pub fn alpha(&self) -> f64 {
        (1.0 - self.beta * self.beta).sqrt()
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Total parameter count over all weights and biases.
    pub fn param_count(&self) -> usize {
        (0..self.depth())
            .map(|l| self.layer_sizes[l + 1] * (self.layer_sizes[l] + 1))
            .sum()
    }
}

/// Weight matrices (`n_{l+1} x n_l`) and bias vectors, one pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl NetworkParams {
    /// Draw all entries i.i.d. standard normal from the config seed.
    pub fn init(config: &NetworkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..config.depth() {
            let (n_in, n_out) = (config.layer_sizes[l], config.layer_sizes[l + 1]);
            let w = Array2::from_shape_fn((n_out, n_in), |_| rng.sample::<f64, _>(StandardNormal));
            let b = Array1::from_shape_fn(n_out, |_| rng.sample::<f64, _>(StandardNormal));
            weights.push(w);
            biases.push(b);
        }
        Self { weights, biases }
    }

    /// Flatten as `W^0` (row-major), `b^0`, `W^1`, `b^1`, ...
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_flat(config: &NetworkConfig, flat: &[f64]) -> Result<Self, NetError> {
        if flat.len() != config.param_count() {
            return Err(NetError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                config.param_count(),
                flat.len()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut at = 0;
        for l in 0..config.depth() {
            let (n_in, n_out) = (config.layer_sizes[l], config.layer_sizes[l + 1]);
            let w = Array2::from_shape_vec((n_out, n_in), flat[at..at + n_out * n_in].to_vec())
                .expect("shape checked");
            at += n_out * n_in;
            let b = Array1::from_vec(flat[at..at + n_out].to_vec());
            at += n_out;
            weights.push(w);
            biases.push(b);
        }
        Ok(Self { weights, biases })
    }
}

/// Everything `backward` needs from a forward pass: `activations[l] = a^l`
/// (with `a^0` the inputs) and `preacts[l] = a~^{l+1}`.
#[derive(Debug)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
    pub preacts: Vec<Array2<f64>>,
}

/// Batched forward pass over the rows of `z` (`N x n0`). Returns the scalar
/// outputs and the cache for backpropagation.
pub fn forward(
    params: &NetworkParams,
    config: &NetworkConfig,
    z: &Array2<f64>,
) -> Result<(Vec<f64>, ForwardCache), NetError> {
    if z.ncols() != config.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "inputs have {} columns, network expects {}",
            z.ncols(),
            config.input_dim()
        )));
    }
    let alpha = config.alpha();
    let mut activations = vec![z.clone()];
    let mut preacts = Vec::new();
    for l in 0..config.depth() {
        let scale = alpha / (config.layer_sizes[l] as f64).sqrt();
        let mut pre = activations[l].dot(&params.weights[l].t());
        pre.mapv_inplace(|v| v * scale);
        pre += &params
            .biases[l]
            .view()
            .insert_axis(Axis(0))
            .mapv(|b| config.beta * b);
        if l + 1 < config.depth() {
            let act = pre.mapv(|v| config.activation.apply(v));
            preacts.push(pre);
            activations.push(act);
        } else {
            preacts.push(pre);
        }
    }
    let out = preacts.last().unwrap().column(0).to_vec();
    Ok((out, ForwardCache { activations, preacts }))
}

/// Parameter gradient of `sum_i grad_out[i] * f(z_i)` by reverse mode.
pub fn backward(
    params: &NetworkParams,
    config: &NetworkConfig,
    cache: &ForwardCache,
    grad_out: &[f64],
) -> NetworkParams {
    let n = cache.activations[0].nrows();
    assert_eq!(grad_out.len(), n, "grad_out length mismatch");
    let alpha = config.alpha();
    let depth = config.depth();
    let mut d_weights = vec![Array2::zeros((0, 0)); depth];
    let mut d_biases = vec![Array1::zeros(0); depth];
    // Sensitivity w.r.t. the current layer's preactivations.
    let mut g = Array2::from_shape_vec((n, 1), grad_out.to_vec()).expect("column vector");
    for l in (0..depth).rev() {
        let scale = alpha / (config.layer_sizes[l] as f64).sqrt();
        let mut dw = g.t().dot(&cache.activations[l]);
        dw.mapv_inplace(|v| v * scale);
        d_weights[l] = dw;
        d_biases[l] = g.sum_axis(Axis(0)).mapv(|v| v * config.beta);
        if l > 0 {
            let mut back = g.dot(&params.weights[l]);
            back.mapv_inplace(|v| v * scale);
            let deriv = cache.preacts[l - 1].mapv(|v| config.activation.deriv(v));
            g = back * &deriv;
        }
    }
    NetworkParams {
        weights: d_weights,
        biases: d_biases,
    }
}

/// Per-input parameter gradients: row `i` is `grad_theta f(z_i)` in the
/// [`NetworkParams::flatten`] order, computed by one one-hot backward pass per
/// input. Dense storage is refused above `budget` matrix entries.
pub fn jacobian_rows(
    params: &NetworkParams,
    config: &NetworkConfig,
    z: &Array2<f64>,
    budget: usize,
) -> Result<Array2<f64>, NetError> {
    let n = z.nrows();
    let p = config.param_count();
    if n.saturating_mul(p) > budget {
        return Err(NetError::BudgetExceeded {
            rows: n,
            params: p,
            budget,
        });
    }
    let (_, cache) = forward(params, config, z)?;
    let mut jac = Array2::zeros((n, p));
    let mut one_hot = vec![0.0; n];
    for i in 0..n {
        one_hot[i] = 1.0;
        let g = backward(params, config, &cache, &one_hot);
        one_hot[i] = 0.0;
        for (j, v) in g.flatten().into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Default dense-jacobian budget: 2^27 f64 entries (1 GiB).
pub const DEFAULT_JACOBIAN_BUDGET: usize = 1 << 27;

/// Frozen initial outputs and the volume constant of the initial-density
/// shift: pre-densities are `f(z_i) - f0_i + c` with `c = log(v0 / (N - v0))`,
/// so training starts from the exactly constant field `v0 / N`.
#[derive(Debug, Clone)]
pub struct ShiftedField {
    pub f0: Vec<f64>,
    pub c: f64,
    /// Grid shape of `f0`, kept for interpolation during up-sampling.
    pub nx: usize,
    pub ny: usize,
}

impl ShiftedField {
    /// Capture the initial outputs over the embedded grid.
    pub fn new(
        params_at_init: &NetworkParams,
        config: &NetworkConfig,
        z: &Array2<f64>,
        nx: usize,
        ny: usize,
        v0: f64,
    ) -> Result<Self, NetError> {
        let (f0, _) = forward(params_at_init, config, z)?;
        assert_eq!(f0.len(), nx * ny, "grid shape mismatch");
        let n = (nx * ny) as f64;
        Ok(Self {
            f0,
            c: (v0 / (n - v0)).ln(),
            nx,
            ny,
        })
    }

    /// Shifted pre-densities at the training grid.
    pub fn shifted_forward(
        &self,
        params: &NetworkParams,
        config: &NetworkConfig,
        z: &Array2<f64>,
    ) -> Result<(Vec<f64>, ForwardCache), NetError> {
        let (f, cache) = forward(params, config, z)?;
        assert_eq!(f.len(), self.f0.len(), "grid shape mismatch");
        let x = f
            .iter()
            .zip(&self.f0)
            .map(|(&fi, &f0i)| fi - f0i + self.c)
            .collect();
        Ok((x, cache))
    }

}
