//! Coordinate embeddings that make the network's tangent kernel
//! (approximately) invariant under translations of the grid.
//!
//! - [`Embedding::Torus`]: each coordinate goes to a circle, so embedded
//!   inner products depend only on coordinate differences (exact translation
//!   invariance, approximate rotation invariance for small angles).
//! - [`Embedding::Gaussian`]: random Fourier features whose normalized inner
//!   products estimate the Gaussian kernel `exp(-d^2 / (2 ell^2))`.
//! - [`Embedding::Identity`]: raw coordinates, the no-embedding control.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// How random Fourier feature phases are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// All phases zero (the closed-form Gaussian-kernel choice).
    Zero,
    /// Phases uniform on `[0, 2*pi)`.
    Uniform,
}

/// Frequencies and phases of a Gaussian random-Fourier-features embedding.
#[derive(Debug, Clone)]
pub struct GaussianEmbedding {
    pub n0: usize,
    pub ell: f64,
    pub seed: u64,
    pub phase_mode: PhaseMode,
    /// `n0 x 2` frequency matrix, rows i.i.d. `N(0, I/ell^2)`.
    w: Vec<[f64; 2]>,
    b: Vec<f64>,
}

impl GaussianEmbedding {
    pub fn new(n0: usize, ell: f64, seed: u64, phase_mode: PhaseMode) -> Self {
        assert!(n0 >= 1, "embedding dimension must be positive");
        assert!(ell > 0.0, "length scale must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Vec::with_capacity(n0);
        for _ in 0..n0 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            w.push([a / ell, b / ell]);
        }
        let b = match phase_mode {
            PhaseMode::Zero => vec![0.0; n0],
            PhaseMode::Uniform => (0..n0).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        };
        Self {
            n0,
            ell,
            seed,
            phase_mode,
            w,
            b,
        }
    }

    /// `phi(p)_i = sqrt(2) sin(w_i . p + pi/4 + b_i)`.
    pub fn embed(&self, p: [f64; 2]) -> Vec<f64> {
        let s = 2.0_f64.sqrt();
        self.w
            .iter()
            .zip(&self.b)
            .map(|(wi, &bi)| s * (wi[0] * p[0] + wi[1] * p[1] + PI / 4.0 + bi).sin())
            .collect()
    }
}

/// A coordinate embedding `R^2 -> R^{n0}`.
#[derive(Debug, Clone)]
pub enum Embedding {
    Identity,
    /// `phi(p) = r (cos d p1, sin d p1, cos d p2, sin d p2)` with
    /// discretization angle `d`.
    Torus { r: f64, delta: f64 },
    Gaussian(GaussianEmbedding),
}

impl Embedding {
    /// Default torus embedding for an `nx x ny` grid: radius `sqrt(2)` and
    /// `delta = pi / (2 max(nx, ny))`.
    pub fn torus_for_grid(nx: usize, ny: usize) -> Self {
        Embedding::Torus {
            r: 2.0_f64.sqrt(),
            delta: PI / (2.0 * nx.max(ny) as f64),
        }
    }

    /// Output dimension `n0`.
    pub fn dim(&self) -> usize {
        match self {
            Embedding::Identity => 2,
            Embedding::Torus { .. } => 4,
            Embedding::Gaussian(g) => g.n0,
        }
    }

    /// Embed a single point.
    pub fn embed(&self, p: [f64; 2]) -> Vec<f64> {
        match self {
            Embedding::Identity => vec![p[0], p[1]],
            Embedding::Torus { r, delta } => {
                let (a1, a2) = (delta * p[0], delta * p[1]);
                vec![r * a1.cos(), r * a1.sin(), r * a2.cos(), r * a2.sin()]
            }
            Embedding::Gaussian(g) => g.embed(p),
        }
    }

    /// Embed every element center of an `nx x ny` grid: row `e = ey*nx + ex`
    /// holds `phi((ex + 0.5, ey + 0.5))`.
    pub fn embed_grid(&self, nx: usize, ny: usize) -> Array2<f64> {
        assert!(nx >= 1 && ny >= 1, "grid must be nonempty");
        let n = nx * ny;
        let mut z = Array2::zeros((n, self.dim()));
        for ey in 0..ny {
            for ex in 0..nx {
                let row = self.embed([ex as f64 + 0.5, ey as f64 + 0.5]);
                for (j, v) in row.into_iter().enumerate() {
                    z[(ey * nx + ex, j)] = v;
                }
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(&x, &y)| x * y).sum()
    }

    #[test]
    fn torus_norm_is_r_sqrt_2() {
        let e = Embedding::torus_for_grid(8, 8);
        let p = e.embed([3.5, 1.5]);
        assert!((dot(&p, &p) - 4.0).abs() < 1e-12); // 2 r^2 with r = sqrt(2)
    }

    #[test]
    fn torus_inner_product_matches_trig_identity() {
        let (r, delta) = (2.0_f64.sqrt(), PI / 16.0);
        let e = Embedding::Torus { r, delta };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            let q = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            let got = dot(&e.embed(p), &e.embed(q));
            let expected =
                r * r * ((delta * (p[0] - q[0])).cos() + (delta * (p[1] - q[1])).cos());
            assert!((got - expected).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn torus_inner_products_are_shift_invariant(
            p0 in -10.0f64..10.0, p1 in -10.0f64..10.0,
            q0 in -10.0f64..10.0, q1 in -10.0f64..10.0,
            s0 in -50i32..50, s1 in -50i32..50,
        ) {
            let e = Embedding::torus_for_grid(12, 6);
            let p = [p0, p1];
            let q = [q0, q1];
            let ps = [p0 + s0 as f64, p1 + s1 as f64];
            let qs = [q0 + s0 as f64, q1 + s1 as f64];
            let a = dot(&e.embed(p), &e.embed(q));
            let b = dot(&e.embed(ps), &e.embed(qs));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn torus_rotation_invariance_taylor_bound() {
        let (r, delta) = (2.0_f64.sqrt(), PI / 32.0);
        let e = Embedding::Torus { r, delta };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p: [f64; 2] = [rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0)];
            let q: [f64; 2] = [rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0)];
            let d = [p[0] - q[0], p[1] - q[1]];
            if delta * d[0].abs().max(d[1].abs()) > 1.0 {
                continue;
            }
            let got = dot(&e.embed(p), &e.embed(q));
            let d2 = d[0] * d[0] + d[1] * d[1];
            let quad = r * r * (2.0 - delta * delta * d2 / 2.0);
            let d4 = d[0].powi(4) + d[1].powi(4);
            let bound = r * r * delta.powi(4) * d4 / 24.0;
            assert!(
                (got - quad).abs() <= bound + 1e-15,
                "Taylor bound violated: |{got} - {quad}| > {bound}"
            );
        }
    }

    #[test]
    fn gaussian_norm_concentrates_on_one() {
        let g = GaussianEmbedding::new(10_000, 4.0, 7, PhaseMode::Zero);
        let p = g.embed([3.2, 5.9]);
        let v = dot(&p, &p) / 10_000.0;
        assert!((v - 1.0).abs() <= 0.05, "norm estimate {v}");
    }

    #[test]
    fn gaussian_kernel_value_at_one_length_scale() {
        // |p - q| = 4 with ell = 4: kernel should be near exp(-1/2).
        let g = GaussianEmbedding::new(10_000, 4.0, 11, PhaseMode::Zero);
        let a = g.embed([0.0, 0.0]);
        let b = g.embed([4.0, 0.0]);
        let v = dot(&a, &b) / 10_000.0;
        assert!((v - (-0.5_f64).exp()).abs() <= 0.05, "kernel estimate {v}");
    }

    #[test]
    fn gaussian_kernel_decays_at_long_range() {
        let g = GaussianEmbedding::new(10_000, 4.0, 13, PhaseMode::Zero);
        let a = g.embed([0.0, 0.0]);
        let b = g.embed([40.0, 30.0]); // 50 elements away = 12.5 length scales
        let v = dot(&a, &b) / 10_000.0;
        assert!(v.abs() <= 0.05, "kernel should be near zero, got {v}");
    }

    #[test]
    fn rff_error_halves_when_n0_quadruples() {
        // Monte-Carlo rate check with a frozen master seed: sup kernel error
        // over 50 random pairs, averaged over 20 embedding seeds.
        let ell = 4.0;
        let mut pair_rng = ChaCha8Rng::seed_from_u64(99);
        let pairs: Vec<([f64; 2], [f64; 2])> = (0..50)
            .map(|_| {
                (
                    [pair_rng.gen_range(0.0..30.0), pair_rng.gen_range(0.0..30.0)],
                    [pair_rng.gen_range(0.0..30.0), pair_rng.gen_range(0.0..30.0)],
                )
            })
            .collect();
        let sup_err = |n0: usize, seed: u64| -> f64 {
            let g = GaussianEmbedding::new(n0, ell, seed, PhaseMode::Zero);
            pairs
                .iter()
                .map(|(p, q)| {
                    let est = dot(&g.embed(*p), &g.embed(*q)) / n0 as f64;
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                    (est - (-d2 / (2.0 * ell * ell)).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let mean_small: f64 = (0..20).map(|s| sup_err(10_000, s)).sum::<f64>() / 20.0;
        let mean_large: f64 = (0..20).map(|s| sup_err(40_000, s)).sum::<f64>() / 20.0;
        assert!(
            mean_large <= 0.5 * mean_small,
            "error did not halve: {mean_large} vs {mean_small}"
        );
    }

    #[test]
    fn identity_grid_rows_are_element_centers() {
        let z = Embedding::Identity.embed_grid(2, 2);
        let expected = [[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(z[(i, 0)], row[0]);
            assert_eq!(z[(i, 1)], row[1]);
        }
    }

    #[test]
    fn torus_grid_rows_have_constant_norm() {
        let e = Embedding::torus_for_grid(5, 3);
        let z = e.embed_grid(5, 3);
        for i in 0..15 {
            let n: f64 = (0..4).map(|j| z[(i, j)] * z[(i, j)]).sum();
            assert!((n - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_grid_is_deterministic_under_seed() {
        let a = Embedding::Gaussian(GaussianEmbedding::new(64, 2.0, 42, PhaseMode::Zero))
            .embed_grid(4, 3);
        let b = Embedding::Gaussian(GaussianEmbedding::new(64, 2.0, 42, PhaseMode::Zero))
            .embed_grid(4, 3);
        assert_eq!(a, b);
        let c = Embedding::Gaussian(GaussianEmbedding::new(64, 2.0, 43, PhaseMode::Zero))
            .embed_grid(4, 3);
        assert_ne!(a, c);
    }
}
