use super::*;
use crate::embed::{GaussianEmbedding, PhaseMode};
use crate::fea::presets;
use crate::net::Activation;

fn small_gaussian_setup() -> (ProblemSpec, Embedding, NetworkConfig) {
    let spec = presets::mbb(20, 8, 0.5).unwrap();
    let embedding = Embedding::Gaussian(GaussianEmbedding::new(256, 4.0, 5, PhaseMode::Zero));
    let config =
        NetworkConfig::new(vec![256, 256, 1], 0.5, Activation::StandardizedRelu, 3).unwrap();
    (spec, embedding, config)
}

#[test]
fn zero_iterations_returns_the_constant_initial_field() {
    let (spec, embedding, config) = small_gaussian_setup();
    let mut opt = Optimizer::rprop(1e-3);
    let run = train_nn(&spec, &embedding, &config, &mut opt, &TrainOptions::new(0)).unwrap();
    let target = spec.v0 / spec.n_elements() as f64;
    for &y in &run.field.y {
        assert!((y - target).abs() < 1e-12);
    }
    assert_eq!(run.record.rows.len(), 1);
}

#[test]
fn nn_training_reduces_compliance_and_respects_volume() {
    let (spec, embedding, config) = small_gaussian_setup();
    let mut opt = Optimizer::rprop(1e-3);
    let run = train_nn(&spec, &embedding, &config, &mut opt, &TrainOptions::new(120)).unwrap();
    let c0 = run.record.rows[0].compliance;
    let cf = run.record.final_compliance();
    assert!(cf < c0, "training failed to reduce compliance: {c0} -> {cf}");
    assert!(run.record.max_volume_error() <= 1e-8 * spec.n_elements() as f64);
    assert_eq!(run.record.rows.len(), 121);
    // regression band for the recorded baseline; see the repository docs
    let band = NN_MBB20X8_BASELINE;
    assert!(
        cf > band * 0.8 && cf < band * 1.2,
        "final compliance {cf} left the regression band around {band} (initial {c0}, gray {})",
        gray_fraction(&run.field.y)
    );
}

/// Final compliance of the seeded 20x8 network run above, frozen from the
/// first validated execution as a drift alarm (initial constant field: 605.1).
const NN_MBB20X8_BASELINE: f64 = 152.7100615494634;

/// Final compliance of the seeded 30x10 filtered run below (initial: 984.6).
const MF_MBB30X10_BASELINE: f64 = 204.22947681933238;

#[test]
fn mf_training_reduces_compliance_and_respects_volume() {
    let spec = presets::mbb(30, 10, 0.5).unwrap();
    let filter = ConeFilter::new(30, 10, 2.4);
    let mut opt = Optimizer::rprop(1e-3);
    let run = train_mf(&spec, &filter, &mut opt, &TrainOptions::new(200)).unwrap();
    let c0 = run.record.rows[0].compliance;
    let cf = run.record.final_compliance();
    assert!(cf < c0);
    assert!(run.record.max_volume_error() <= 1e-8 * spec.n_elements() as f64);
    let band = MF_MBB30X10_BASELINE;
    assert!(
        cf > band * 0.8 && cf < band * 1.2,
        "final compliance {cf} left the regression band around {band} (initial {c0}, gray {})",
        gray_fraction(&run.field.y)
    );
}

#[test]
fn constant_density_gradient_produces_no_mf_update() {
    let filter = ConeFilter::new(8, 6, 2.0);
    let t = crate::density::DensityTransform::new(vec![0.3; 48], 20.0).unwrap();
    let grad_xbar = filter.apply_transpose(&t.apply_dx(&vec![7.5; 48]));
    assert!(grad_xbar.iter().all(|&g| g.abs() < 1e-12));
}

#[test]
fn training_is_deterministic_under_fixed_seed() {
    let (spec, embedding, config) = small_gaussian_setup();
    let run = |seed: u64| {
        let config = NetworkConfig::new(
            config.layer_sizes.clone(),
            config.beta,
            config.activation,
            seed,
        )
        .unwrap();
        let mut opt = Optimizer::rprop(1e-3);
        train_nn(&spec, &embedding, &config, &mut opt, &TrainOptions::new(15)).unwrap()
    };
    let a = run(9);
    let b = run(9);
    for (ra, rb) in a.record.rows.iter().zip(&b.record.rows) {
        assert_eq!(ra.compliance.to_bits(), rb.compliance.to_bits());
        assert_eq!(ra.grad_norm.to_bits(), rb.grad_norm.to_bits());
    }
    assert_eq!(a.field.y, b.field.y);
    let c = run(10);
    assert_ne!(a.field.y, c.field.y);
}

#[test]
fn unfiltered_gd_develops_more_checkerboard_than_filtered() {
    let spec = presets::mbb(30, 10, 0.5).unwrap();
    let iters = 200;
    let run = |rmin: f64| {
        let filter = ConeFilter::new(30, 10, rmin);
        let mut opt = Optimizer::gd(0.1);
        train_mf(&spec, &filter, &mut opt, &TrainOptions::new(iters)).unwrap()
    };
    // rmin = 1 keeps only the center weight: the identity filter
    let raw = run(1.0);
    let filtered = run(2.5);
    let ci_raw = checkerboard_index(&raw.field.y, 30, 10);
    let ci_filtered = checkerboard_index(&filtered.field.y, 30, 10);
    assert!(
        ci_raw > ci_filtered,
        "expected more high-frequency energy without filtering: {ci_raw} vs {ci_filtered}"
    );
}

#[test]
fn ntk_drift_is_recorded_and_starts_at_zero() {
    let spec = presets::mbb(8, 4, 0.5).unwrap();
    let embedding = Embedding::Gaussian(GaussianEmbedding::new(64, 4.0, 6, PhaseMode::Zero));
    let config =
        NetworkConfig::new(vec![64, 64, 1], 0.5, Activation::StandardizedRelu, 4).unwrap();
    let mut opt = Optimizer::rprop(1e-3);
    let mut options = TrainOptions::new(20);
    options.ntk_drift_every = Some(10);
    let run = train_nn(&spec, &embedding, &config, &mut opt, &options).unwrap();
    let drifts: Vec<(usize, f64)> = run
        .record
        .rows
        .iter()
        .filter_map(|r| r.ntk_drift.map(|d| (r.iter, d)))
        .collect();
    assert_eq!(drifts.iter().map(|&(i, _)| i).collect::<Vec<_>>(), vec![0, 10, 20]);
    assert!(drifts[0].1 == 0.0);
    assert!(drifts.iter().all(|&(_, d)| d.is_finite()));
}

#[test]
fn upsample_factor_one_reproduces_the_training_field() {
    let spec = presets::mbb(10, 6, 0.45).unwrap();
    let embedding = Embedding::torus_for_grid(10, 6);
    let config = NetworkConfig::new(
        vec![4, 64, 64, 1],
        0.2,
        Activation::StandardizedCosine { omega: 3.0 },
        8,
    )
    .unwrap();
    let mut opt = Optimizer::rprop(1e-3);
    let run = train_nn(&spec, &embedding, &config, &mut opt, &TrainOptions::new(40)).unwrap();
    let fine = upsample(&run.params, &config, &embedding, &run.shift, 1, spec.v0).unwrap();
    for (a, b) in fine.y.iter().zip(&run.field.y) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn upsample_of_untrained_network_is_constant() {
    let (nx, ny, v0) = (6usize, 4usize, 12.0f64);
    let embedding = Embedding::torus_for_grid(nx, ny);
    let config = NetworkConfig::new(
        vec![4, 32, 1],
        0.3,
        Activation::StandardizedCosine { omega: 2.0 },
        12,
    )
    .unwrap();
    let params = NetworkParams::init(&config);
    let z = embedding.embed_grid(nx, ny);
    let shift = crate::net::ShiftedField::new(&params, &config, &z, nx, ny, v0).unwrap();
    let field = upsample(&params, &config, &embedding, &shift, 4, v0).unwrap();
    let target = v0 / (nx * ny) as f64;
    for &y in &field.y {
        assert!((y - target).abs() < 1e-9, "{y} vs {target}");
    }
}
