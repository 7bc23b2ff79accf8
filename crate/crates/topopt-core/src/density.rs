//! The volume-matched sigmoid transform, its implicit-differentiation
//! operator, and the cone density filter used by the filtered baseline.
//!
//! Pre-densities `x` map to densities `y_i = sigmoid(x_i + b)` where the
//! scalar bias `b` is chosen so the total volume equals the target exactly.
//! The chain rule through that constrained map is the matrix-free operator
//! `(D_X g)_i = a_i g_i - a_i <a, g> / |a|_1` with `a_i` the sigmoid slopes:
//! symmetric, positive semi-definite, kills constant vectors, eigenvalues at
//! most 1/4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("volume target {v0} outside (0, {n})")]
    InvalidVolume { v0: f64, n: f64 },
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_dot(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Find the unique bias `b` with `sum_i sigmoid(x_i + b) = v0`, by bisection
/// on a saturation-guaranteed bracket followed by Newton polish.
pub fn find_bias(x: &[f64], v0: f64) -> Result<f64, DensityError> {
    let n = x.len() as f64;
    if !(v0 > 0.0 && v0 < n) {
        return Err(DensityError::InvalidVolume { v0, n });
    }
    let volume = |b: f64| x.iter().map(|&xi| sigmoid(xi + b)).sum::<f64>();
    let xmax = x.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let span = xmax + logit(v0 / n).abs() + 40.0;
    let (mut lo, mut hi) = (-span, span);
    debug_assert!(volume(lo) <= v0 && volume(hi) >= v0);
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if volume(mid) < v0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..5 {
        let f = volume(b) - v0;
        let df: f64 = x.iter().map(|&xi| sigmoid_dot(xi + b)).sum();
        if df > 0.0 {
            b -= f / df;
        }
    }
    debug_assert!((volume(b) - v0).abs() <= 1e-10 * n);
    Ok(b)
}

/// Pre-densities together with the volume-matching bias, the resulting
/// densities, and the sigmoid slopes needed by [`DensityTransform::apply_dx`].
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct DensityTransform {
    pub x: Vec<f64>,
    pub bias: f64,
    pub y: Vec<f64>,
    pub sdot: Vec<f64>,
}

impl DensityTransform {
    pub fn new(x: Vec<f64>, v0: f64) -> Result<Self, DensityError> {
        let bias = find_bias(&x, v0)?;
        let y: Vec<f64> = x.iter().map(|&xi| sigmoid(xi + bias)).collect();
        let sdot: Vec<f64> = x.iter().map(|&xi| sigmoid_dot(xi + bias)).collect();
        Ok(Self { x, bias, y, sdot })
    }

    /// Total material volume of the transformed field.
    pub fn volume(&self) -> f64 {
        self.y.iter().sum()
    }

    /// Matrix-free product with the implicit-differentiation operator:
    /// `(D_X g)_i = a_i g_i - a_i <a, g> / |a|_1` with `a = sdot`.
    pub fn apply_dx(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.sdot.len(), "gradient length mismatch");
        let a = &self.sdot;
        let a1: f64 = a.iter().sum();
        let ag: f64 = a.iter().zip(g).map(|(&ai, &gi)| ai * gi).sum();
        let mean = ag / a1;
        a.iter().zip(g).map(|(&ai, &gi)| ai * (gi - mean)).collect()
    }

    /// Chain rule from a density gradient to a pre-density gradient; exactly
    /// [`Self::apply_dx`], named for its role in the training loops.
    pub fn grad_x_from_grad_y(&self, grad_y: &[f64]) -> Vec<f64> {
        self.apply_dx(grad_y)
    }
}

/// A trained (or constructed) density field: densities plus the pre-densities
/// and bias that produced them.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub bias: f64,
}

impl From<&DensityTransform> for DensityField {
    fn from(t: &DensityTransform) -> Self {
        Self {
            y: t.y.clone(),
            x: t.x.clone(),
            bias: t.bias,
        }
    }
}

/// Cone (linear hat) density filter on the element grid with radius `rmin`
/// in element units. Stencil weights are `max(0, rmin - dist)`, truncated at
/// the boundary and renormalized per output element, so constants are fixed
/// points everywhere.
#[derive(Debug, Clone)]
pub struct ConeFilter {
    pub nx: usize,
    pub ny: usize,
    pub rmin: f64,
    offsets: Vec<(isize, isize, f64)>,
    row_sums: Vec<f64>,
}

impl ConeFilter {
    pub fn new(nx: usize, ny: usize, rmin: f64) -> Self {
        assert!(rmin >= 1.0, "rmin must be at least 1, got {rmin}");
        let reach = rmin.ceil() as isize;
        let mut offsets = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let w = rmin - ((dx * dx + dy * dy) as f64).sqrt();
                if w > 0.0 {
                    offsets.push((dx, dy, w));
                }
            }
        }
        let mut row_sums = vec![0.0; nx * ny];
        for ey in 0..ny as isize {
            for ex in 0..nx as isize {
                let mut s = 0.0;
                for &(dx, dy, w) in &offsets {
                    let (jx, jy) = (ex + dx, ey + dy);
                    if jx >= 0 && jx < nx as isize && jy >= 0 && jy < ny as isize {
                        s += w;
                    }
                }
                row_sums[ey as usize * nx + ex as usize] = s;
            }
        }
        Self {
            nx,
            ny,
            rmin,
            offsets,
            row_sums,
        }
    }

    /// `x = T xbar`: row-normalized cone convolution.
    pub fn apply(&self, xbar: &[f64]) -> Vec<f64> {
        assert_eq!(xbar.len(), self.nx * self.ny, "field size mismatch");
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut out = vec![0.0; xbar.len()];
        for ey in 0..ny {
            for ex in 0..nx {
                let e = (ey * nx + ex) as usize;
                let mut acc = 0.0;
                for &(dx, dy, w) in &self.offsets {
                    let (jx, jy) = (ex + dx, ey + dy);
                    if jx >= 0 && jx < nx && jy >= 0 && jy < ny {
                        acc += w * xbar[(jy * nx + jx) as usize];
                    }
                }
                out[e] = acc / self.row_sums[e];
            }
        }
        out
    }

    /// Exact adjoint `T^T g`: each output element scatters `g_e / rowsum_e`
    /// back through the same stencil.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.nx * self.ny, "field size mismatch");
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut out = vec![0.0; g.len()];
        for ey in 0..ny {
            for ex in 0..nx {
                let e = (ey * nx + ex) as usize;
                let scaled = g[e] / self.row_sums[e];
                for &(dx, dy, w) in &self.offsets {
                    let (jx, jy) = (ex + dx, ey + dy);
                    if jx >= 0 && jx < nx && jy >= 0 && jy < ny {
                        out[(jy * nx + jx) as usize] += w * scaled;
                    }
                }
            }
        }
        out
    }
}
