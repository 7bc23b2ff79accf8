//! First-order optimizers over flat parameter vectors: plain gradient
//! descent, Adam, and the sign-based iRPROP- update. All state is
//! preallocated on first use and the update order is fixed, so runs are
//! bit-reproducible.

/// Plain gradient descent. `scale` multiplies the step size (the training
/// loop feeds the late-phase ramp through it).
#[derive(Debug, Clone)]
pub struct Gd {
    pub lr: f64,
}

/// Adam with the usual bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// iRPROP-: per-parameter step sizes grown on consistent gradient signs and
/// shrunk on sign flips, with the flipped step skipped.
#[derive(Debug, Clone)]
pub struct Rprop {
    pub delta0: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    deltas: Vec<f64>,
    prev_grad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Gd(Gd),
    Adam(Adam),
    Rprop(Rprop),
}

impl Optimizer {
    pub fn gd(lr: f64) -> Self {
        Optimizer::Gd(Gd { lr })
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam(Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        })
    }

    pub fn rprop(delta0: f64) -> Self {
        Optimizer::Rprop(Rprop {
            delta0,
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_min: 1e-9,
            delta_max: 1.0,
            deltas: Vec::new(),
            prev_grad: Vec::new(),
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Optimizer::Gd(_) => "gd",
            Optimizer::Adam(_) => "adam",
            Optimizer::Rprop(_) => "rprop",
        }
    }

    /// Apply one update in place. `scale` multiplies the step size of the
    /// gradient-scaled optimizers; the sign-based RPROP has no step size to
    /// scale and ignores it.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], scale: f64) {
        assert_eq!(theta.len(), grad.len(), "gradient length mismatch");
        match self {
            Optimizer::Gd(gd) => {
                let lr = gd.lr * scale;
                for (t, &g) in theta.iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            Optimizer::Adam(adam) => {
                if adam.m.is_empty() {
                    adam.m = vec![0.0; theta.len()];
                    adam.v = vec![0.0; theta.len()];
                }
                adam.t += 1;
                let bc1 = 1.0 - adam.beta1.powi(adam.t as i32);
                let bc2 = 1.0 - adam.beta2.powi(adam.t as i32);
                let lr = adam.lr * scale;
                for i in 0..theta.len() {
                    let g = grad[i];
                    adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g;
                    adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g * g;
                    let m_hat = adam.m[i] / bc1;
                    let v_hat = adam.v[i] / bc2;
                    theta[i] -= lr * m_hat / (v_hat.sqrt() + adam.eps);
                }
            }
            Optimizer::Rprop(rp) => {
                if rp.deltas.is_empty() {
                    rp.deltas = vec![rp.delta0; theta.len()];
                    rp.prev_grad = vec![0.0; theta.len()];
                }
                for i in 0..theta.len() {
                    let mut g = grad[i];
                    let s = g * rp.prev_grad[i];
                    if s > 0.0 {
                        rp.deltas[i] = (rp.deltas[i] * rp.eta_plus).min(rp.delta_max);
                    } else if s < 0.0 {
                        rp.deltas[i] = (rp.deltas[i] * rp.eta_minus).max(rp.delta_min);
                        g = 0.0;
                    }
                    if g > 0.0 {
                        theta[i] -= rp.deltas[i];
                    } else if g < 0.0 {
                        theta[i] += rp.deltas[i];
                    }
                    rp.prev_grad[i] = g;
                }
            }
        }
    }
}

/// Step-size ramp for plain gradient descent: the base step for the first
/// two thirds of training, then a linear climb to `10 * base` at the last
/// iteration to counteract vanishing sigmoid gradients on near-binary fields.
pub fn lr_ramp(base: f64, iter: usize, iters: usize) -> f64 {
    assert!(iter < iters, "iteration {iter} out of range 0..{iters}");
    let ramp_start = (2 * iters).div_ceil(3);
    if iter < ramp_start {
        base
    } else if iters - 1 == ramp_start {
        10.0 * base
    } else {
        base * (1.0 + 9.0 * (iter - ramp_start) as f64 / (iters - 1 - ramp_start) as f64)
    }
}
