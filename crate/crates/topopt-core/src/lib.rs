//! Minimum-compliance topology optimization (SIMP, 2D plane stress) where the
//! density field is either produced by a coordinate network trained with
//! gradient descent or by a classical filtered design-variable field, together
//! with the neural-tangent-kernel analysis tools that relate the two: limiting
//! NTK recursions, spatially invariant coordinate embeddings, radial kernel
//! profiles and their half-maximum filter radius, Gram-matrix spectra, and the
//! FFT square-root filter of the torus kernel.
//!
//! Modules:
//! - [`fea`]: bilinear-quad finite elements, SIMP compliance and its gradient.
//! - [`density`]: sigmoid volume transform, its implicit-differentiation
//!   operator, and the cone density filter.
//! - [`embed`]: torus and Gaussian random-Fourier-feature coordinate
//!   embeddings.
//! - [`net`]: fully-connected networks under NTK parameterization with exact
//!   backpropagation.
//! - [`ntk`]: empirical and limiting NTK Gram matrices, dual activations,
//!   kernel profiles, spectra, and the torus square-root filter.
//! - [`opt`]: training loops for both methods, optimizers, diagnostics, and
//!   up-sampling of trained networks.
//! - [`checkpoint`]: binary serialization of trained models.
//! - [`io`]: PGM/CSV writers shared by the CLI and tests.

// Negated float comparisons reject NaN along with the out-of-range values;
// index loops mirror the matrix math they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod density;
pub mod embed;
pub mod fea;
pub mod fft2;
pub mod io;
pub mod net;
pub mod ntk;
pub mod opt;

pub use density::{ConeFilter, DensityField, DensityTransform};
pub use embed::Embedding;
pub use fea::ProblemSpec;
pub use net::{Activation, NetworkConfig, NetworkParams, ShiftedField};
pub use ntk::{KernelKind, KernelMatrix, KernelProfile};
pub use opt::{Optimizer, RunRecord};

/// Derive `K` independent sub-seeds from a master seed (one per seeded
/// component, in a documented fixed order).
pub fn derive_seeds<const K: usize>(master: u64) -> [u64; K] {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(master);
    std::array::from_fn(|_| rng.gen())
}
