//! Training loops for the two density-generation methods and the shared
//! run diagnostics.
//!
//! Both loops drive the same chain per iteration: produce pre-densities,
//! apply the volume-matched sigmoid, solve the elasticity problem, pull the
//! compliance gradient back through the transform, and push it into the
//! design variables (network parameters or filtered field). Records carry
//! one row per visited state, including the final one, so `iters` steps
//! yield `iters + 1` rows.

mod metrics;
mod optimizer;

pub use metrics::{checkerboard_index, gray_fraction, mirror_asymmetry};
pub use optimizer::{lr_ramp, Adam, Gd, Optimizer, Rprop};

use crate::density::{ConeFilter, DensityError, DensityField, DensityTransform};
use crate::embed::Embedding;
use crate::fea::{compliance_and_grad_warm, DisplacementField, FeaError, ProblemSpec};
use crate::net::{backward, NetError, NetworkConfig, NetworkParams, ShiftedField};
use crate::ntk::{empirical_ntk_direct, KernelMatrix};
use ndarray::Array2;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error(transparent)]
    Fea(#[from] FeaError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("non-finite {what} at iteration {iter}; aborting")]
    NonFinite { what: &'static str, iter: usize },
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iter: usize,
    pub compliance: f64,
    pub volume_error: f64,
    pub gray_fraction: f64,
    pub grad_norm: f64,
    pub ntk_drift: Option<f64>,
}

/// Full run history plus wall time. Wall time stays out of the exported
/// artifacts so identical configs produce identical files.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub rows: Vec<IterRecord>,
    pub wall_secs: f64,
}

impl RunRecord {
    pub fn final_compliance(&self) -> f64 {
        self.rows.last().map(|r| r.compliance).unwrap_or(f64::NAN)
    }

    pub fn max_volume_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.volume_error)
            .fold(0.0, f64::max)
    }
}

/// Training controls shared by both methods.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub iters: usize,
    /// Record empirical-NTK drift relative to initialization every `k`
    /// iterations (network method only; expensive for large grids).
    pub ntk_drift_every: Option<usize>,
}

impl TrainOptions {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            ntk_drift_every: None,
        }
    }
}

/// Result of a network-method run.
#[derive(Debug)]
pub struct TrainedNn {
    pub params: NetworkParams,
    pub shift: ShiftedField,
    pub field: DensityField,
    pub record: RunRecord,
}

/// Result of a filtered-baseline run.
#[derive(Debug)]
pub struct TrainedMf {
    pub xbar: Vec<f64>,
    pub field: DensityField,
    pub record: RunRecord,
}

fn ensure_finite(value: f64, what: &'static str, iter: usize) -> Result<(), OptError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(OptError::NonFinite { what, iter })
    }
}

fn grad_l2(grad: &[f64]) -> f64 {
    grad.iter().map(|&g| g * g).sum::<f64>().sqrt()
}

/// Train the coordinate network: per iteration, shifted forward pass,
/// volume-matched sigmoid, elasticity solve, gradient pull-back through the
/// transform, backpropagation, optimizer step. Deterministic under a fixed
/// seed and config.
pub fn train_nn(
    spec: &ProblemSpec,
    embedding: &Embedding,
    config: &NetworkConfig,
    optimizer: &mut Optimizer,
    options: &TrainOptions,
) -> Result<TrainedNn, OptError> {
    let start = Instant::now();
    let z = embedding.embed_grid(spec.nx, spec.ny);
    let params0 = NetworkParams::init(config);
    let shift = ShiftedField::new(&params0, config, &z, spec.nx, spec.ny, spec.v0)?;
    let ntk_at_init: Option<KernelMatrix> = match options.ntk_drift_every {
        Some(_) => Some(empirical_ntk_direct(&params0, config, &z).map_err(ntk_to_opt)?),
        None => None,
    };
    let mut theta = params0.flatten();
    let mut warm: Option<DisplacementField> = None;
    let mut record = RunRecord::default();
    let iters = options.iters;
    let mut final_state: Option<(NetworkParams, DensityTransform)> = None;

    for iter in 0..=iters {
        let params = NetworkParams::from_flat(config, &theta)?;
        let (x, cache) = shift.shifted_forward(&params, config, &z)?;
        let transform = DensityTransform::new(x, spec.v0)?;
        let (comp, disp) = compliance_and_grad_warm(spec, &transform.y, warm.as_ref())?;
        ensure_finite(comp.c, "compliance", iter)?;
        warm = Some(disp);
        let grad_x = transform.grad_x_from_grad_y(&comp.grad_y);
        let grads = backward(&params, config, &cache, &grad_x).flatten();
        let gnorm = grad_l2(&grads);
        ensure_finite(gnorm, "parameter gradient", iter)?;
        let drift = match (&ntk_at_init, options.ntk_drift_every) {
            (Some(g0), Some(every)) if every > 0 && iter % every == 0 => {
                let gt = empirical_ntk_direct(&params, config, &z).map_err(ntk_to_opt)?;
                Some(gt.rel_frobenius_distance(g0))
            }
            _ => None,
        };
        record.rows.push(IterRecord {
            iter,
            compliance: comp.c,
            volume_error: (transform.volume() - spec.v0).abs(),
            gray_fraction: gray_fraction(&transform.y),
            grad_norm: gnorm,
            ntk_drift: drift,
        });
        if iter == iters {
            final_state = Some((params, transform));
            break;
        }
        let scale = match optimizer {
            Optimizer::Gd(_) => lr_ramp(1.0, iter, iters),
            _ => 1.0,
        };
        optimizer.step(&mut theta, &grads, scale);
    }

    let (params, transform) = final_state.expect("loop always records the final state");
    record.wall_secs = start.elapsed().as_secs_f64();
    Ok(TrainedNn {
        params,
        shift,
        field: DensityField::from(&transform),
        record,
    })
}

// empirical_ntk_direct returns a kernel error; training can only hit its
// network variants.
fn ntk_to_opt(e: crate::ntk::NtkError) -> OptError {
    match e {
        crate::ntk::NtkError::Net(e) => OptError::Net(e),
        other => panic!("unexpected kernel error during training: {other}"),
    }
}

/// Train the filtered baseline: design variables start at zero (the sigmoid
/// bias supplies the constant initial field) and gradients flow through the
/// filter adjoint.
pub fn train_mf(
    spec: &ProblemSpec,
    filter: &ConeFilter,
    optimizer: &mut Optimizer,
    options: &TrainOptions,
) -> Result<TrainedMf, OptError> {
    assert_eq!(
        filter.nx * filter.ny,
        spec.n_elements(),
        "filter grid does not match the problem grid"
    );
    let start = Instant::now();
    let mut xbar = vec![0.0; spec.n_elements()];
    let mut warm: Option<DisplacementField> = None;
    let mut record = RunRecord::default();
    let iters = options.iters;
    let mut final_transform: Option<DensityTransform> = None;

    for iter in 0..=iters {
        let x = filter.apply(&xbar);
        let transform = DensityTransform::new(x, spec.v0)?;
        let (comp, disp) = compliance_and_grad_warm(spec, &transform.y, warm.as_ref())?;
        ensure_finite(comp.c, "compliance", iter)?;
        warm = Some(disp);
        let grad_x = transform.grad_x_from_grad_y(&comp.grad_y);
        let grad_xbar = filter.apply_transpose(&grad_x);
        let gnorm = grad_l2(&grad_xbar);
        ensure_finite(gnorm, "design gradient", iter)?;
        record.rows.push(IterRecord {
            iter,
            compliance: comp.c,
            volume_error: (transform.volume() - spec.v0).abs(),
            gray_fraction: gray_fraction(&transform.y),
            grad_norm: gnorm,
            ntk_drift: None,
        });
        if iter == iters {
            final_transform = Some(transform);
            break;
        }
        let scale = match optimizer {
            Optimizer::Gd(_) => lr_ramp(1.0, iter, iters),
            _ => 1.0,
        };
        optimizer.step(&mut xbar, &grad_xbar, scale);
    }

    let transform = final_transform.expect("loop always records the final state");
    record.wall_secs = start.elapsed().as_secs_f64();
    Ok(TrainedMf {
        xbar,
        field: DensityField::from(&transform),
        record,
    })
}

/// Evaluate a trained network on a `factor`-times finer grid. Fine element
/// centers are expressed in the coarse coordinate frame, the initial-output
/// field is regenerated exactly by re-initializing the network from its seed,
/// and the volume bias is re-solved on the fine grid so the volume fraction
/// carries over exactly. Requires `params` to descend from
/// [`NetworkParams::init`] of the same config, which both training and the
/// checkpoint format guarantee.
pub fn upsample(
    params: &NetworkParams,
    config: &NetworkConfig,
    embedding: &Embedding,
    shift: &ShiftedField,
    factor: usize,
    v0: f64,
) -> Result<DensityField, OptError> {
    assert!(factor >= 1, "up-sampling factor must be at least 1");
    let (nx, ny) = (shift.nx, shift.ny);
    let (fnx, fny) = (factor * nx, factor * ny);
    let mut z = Array2::zeros((fnx * fny, embedding.dim()));
    for fy in 0..fny {
        for fx in 0..fnx {
            let p = [
                (fx as f64 + 0.5) / factor as f64,
                (fy as f64 + 0.5) / factor as f64,
            ];
            let row = embedding.embed(p);
            for (j, v) in row.into_iter().enumerate() {
                z[(fy * fnx + fx, j)] = v;
            }
        }
    }
    let params0 = NetworkParams::init(config);
    let (f0, _) = crate::net::forward(&params0, config, &z)?;
    let (f, _) = crate::net::forward(params, config, &z)?;
    let x: Vec<f64> = f
        .iter()
        .zip(&f0)
        .map(|(&fi, &f0i)| fi - f0i + shift.c)
        .collect();
    let v0_fine = v0 * (factor * factor) as f64;
    let transform = DensityTransform::new(x, v0_fine)?;
    Ok(DensityField::from(&transform))
}

#[cfg(test)]
mod tests;
