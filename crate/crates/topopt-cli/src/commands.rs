//! Command implementations. Every command reads one config, writes its
//! artifacts under the configured output directory, and is byte-reproducible
//! for a fixed config and seed (wall-clock timing goes to stderr only).

// Negated float comparisons reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use crate::config::{ConfigError, EmbeddingKind, Method, RunConfig};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use topopt_core::checkpoint::{Checkpoint, CheckpointError};
use topopt_core::density::ConeFilter;
use topopt_core::fea::FeaError;
use topopt_core::io::{density_to_pixels, field_to_pixels, fmt_f64, write_csv, write_pgm};
use topopt_core::net::{NetworkConfig, NetworkParams};
use topopt_core::ntk::{
    self, half_max_radius, profile_gaussian, profile_torus, KernelMatrix,
};
use topopt_core::opt::{
    self, checkerboard_index, gray_fraction, upsample, RunRecord, TrainOptions,
};
use topopt_core::derive_seeds;

#[derive(Debug)]
pub enum CmdError {
    /// Exit 2: the config (or an input file it references) is invalid.
    Config(String),
    /// Exit 3: the state equation could not be solved.
    Solver(String),
    /// Exit 4: training produced non-finite values.
    NonFinite(String),
    /// Exit 1: anything else (i/o and internal failures).
    Other(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Solver(_) => 3,
            CmdError::NonFinite(_) => 4,
            CmdError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "{m}"),
            CmdError::Solver(m) => write!(f, "solver failure: {m}"),
            CmdError::NonFinite(m) => write!(f, "{m}"),
            CmdError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Other(format!("i/o error: {e}"))
    }
}

fn opt_error(e: opt::OptError) -> CmdError {
    match e {
        opt::OptError::Fea(FeaError::SingularSystem { .. }) => CmdError::Solver(e.to_string()),
        opt::OptError::NonFinite { .. } => CmdError::NonFinite(e.to_string()),
        other => CmdError::Other(other.to_string()),
    }
}

fn ntk_error(e: ntk::NtkError) -> CmdError {
    match e {
        ntk::NtkError::SizeExceeded { .. } | ntk::NtkError::CountExceedsSize { .. } => {
            CmdError::Config(e.to_string())
        }
        other => CmdError::Other(other.to_string()),
    }
}

#[derive(Serialize)]
struct OptimizeSummary {
    method: &'static str,
    nx: usize,
    ny: usize,
    v0: f64,
    seed: u64,
    iters: usize,
    final_compliance: f64,
    gray_fraction: f64,
    checkerboard_index: Option<f64>,
    max_volume_error: f64,
    config: BTreeMap<String, String>,
}

fn write_record_csv(path: &Path, record: &RunRecord) -> Result<(), CmdError> {
    let rows: Vec<Vec<String>> = record
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                fmt_f64(r.compliance),
                fmt_f64(r.volume_error),
                fmt_f64(r.gray_fraction),
                fmt_f64(r.grad_norm),
                r.ntk_drift.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "iter",
            "compliance",
            "volume_error",
            "gray_fraction",
            "grad_norm",
            "ntk_drift",
        ],
        &rows,
    )?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CmdError::Other(format!("json serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<(), CmdError> {
    let spec = cfg.problem()?;
    let method = cfg.method()?;
    let iters = cfg.iters()?;
    let mut optimizer = cfg.optimizer()?;
    let [emb_seed, net_seed] = derive_seeds::<2>(cfg.seed);
    std::fs::create_dir_all(&cfg.out)?;

    let (field, record, method_name) = match method {
        Method::Nn => {
            let embedding = cfg.embedding(spec.nx, spec.ny, emb_seed)?;
            let net_config = cfg.network(embedding.dim(), net_seed)?;
            let mut options = TrainOptions::new(iters);
            options.ntk_drift_every = cfg.ntk_drift_every()?;
            let run = opt::train_nn(&spec, &embedding, &net_config, &mut optimizer, &options)
                .map_err(opt_error)?;
            let ckpt = Checkpoint {
                embedding,
                config: net_config,
                params: run.params,
                shift: run.shift,
                v0: spec.v0,
            };
            ckpt.save(&cfg.out.join("model.ckpt"))
                .map_err(|e| CmdError::Other(e.to_string()))?;
            (run.field, run.record, "nn")
        }
        Method::Mf => {
            let filter = ConeFilter::new(spec.nx, spec.ny, cfg.filter_rmin()?);
            let options = TrainOptions::new(iters);
            let run = opt::train_mf(&spec, &filter, &mut optimizer, &options).map_err(opt_error)?;
            (run.field, run.record, "mf")
        }
    };

    write_pgm(
        &cfg.out.join("density.pgm"),
        spec.nx,
        spec.ny,
        &density_to_pixels(&field.y, spec.nx, spec.ny),
    )?;
    write_record_csv(&cfg.out.join("record.csv"), &record)?;
    let summary = OptimizeSummary {
        method: method_name,
        nx: spec.nx,
        ny: spec.ny,
        v0: spec.v0,
        seed: cfg.seed,
        iters,
        final_compliance: record.final_compliance(),
        gray_fraction: gray_fraction(&field.y),
        checkerboard_index: (spec.nx >= 4 && spec.ny >= 4)
            .then(|| checkerboard_index(&field.y, spec.nx, spec.ny)),
        max_volume_error: record.max_volume_error(),
        config: cfg.echo(),
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    eprintln!(
        "optimize ({method_name}): final compliance {:.6e}, wall {:.1}s",
        record.final_compliance(),
        record.wall_secs
    );
    Ok(())
}

/// Replace the hidden-layer sizes of a network config (used by the `width`
/// override of the `ntk` command).
fn with_hidden_width(config: &NetworkConfig, width: usize) -> Result<NetworkConfig, CmdError> {
    let mut sizes = config.layer_sizes.clone();
    let n = sizes.len();
    for s in sizes[1..n - 1].iter_mut() {
        *s = width;
    }
    NetworkConfig::new(sizes, config.beta, config.activation, config.seed)
        .map_err(|e| CmdError::Config(format!("invalid width override: {e}")))
}

fn export_kernel_row(
    out: &Path,
    tag: &str,
    kernel: &KernelMatrix,
    nx: usize,
    ny: usize,
) -> Result<(), CmdError> {
    let center = (ny / 2) * nx + nx / 2;
    let row: Vec<f64> = (0..kernel.n()).map(|j| kernel.g[(center, j)]).collect();
    write_pgm(
        &out.join(format!("ntk_row_{tag}.pgm")),
        nx,
        ny,
        &field_to_pixels(&row, nx, ny),
    )?;
    let rows: Vec<Vec<String>> = row
        .iter()
        .enumerate()
        .map(|(e, &v)| vec![e.to_string(), fmt_f64(v)])
        .collect();
    write_csv(&out.join(format!("ntk_row_{tag}.csv")), &["element", "value"], &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct NtkCompareSummary {
    width: usize,
    rel_frobenius_error: f64,
}

pub fn cmd_ntk(cfg: &RunConfig) -> Result<(), CmdError> {
    let spec = cfg.problem()?;
    let mode = cfg.ntk_mode()?;
    let [emb_seed, net_seed] = derive_seeds::<2>(cfg.seed);
    let embedding = cfg.embedding(spec.nx, spec.ny, emb_seed)?;
    let mut net_config = cfg.network(embedding.dim(), net_seed)?;
    if let Some(width) = cfg.ntk_width()? {
        net_config = with_hidden_width(&net_config, width)?;
    }
    let z = embedding.embed_grid(spec.nx, spec.ny);
    std::fs::create_dir_all(&cfg.out)?;

    let empirical = if mode == "empirical" || mode == "compare" {
        let params = NetworkParams::init(&net_config);
        let k = ntk::empirical_ntk_direct(&params, &net_config, &z).map_err(ntk_error)?;
        export_kernel_row(&cfg.out, "empirical", &k, spec.nx, spec.ny)?;
        Some(k)
    } else {
        None
    };
    let limiting = if mode == "limiting" || mode == "compare" {
        let k = ntk::limiting_ntk(&net_config, &z).map_err(ntk_error)?;
        export_kernel_row(&cfg.out, "limiting", &k, spec.nx, spec.ny)?;
        Some(k)
    } else {
        None
    };
    if let (Some(emp), Some(lim)) = (&empirical, &limiting) {
        let err = emp.rel_frobenius_distance(lim);
        write_json(
            &cfg.out.join("ntk_compare.json"),
            &NtkCompareSummary {
                width: net_config.layer_sizes[1],
                rel_frobenius_error: err,
            },
        )?;
        eprintln!("ntk compare: relative Frobenius error {err:.4}");
    }
    Ok(())
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(), CmdError> {
    let spec = cfg.problem()?;
    let k = cfg.spectrum_k()?;
    let [emb_seed, net_seed] = derive_seeds::<2>(cfg.seed);
    let embedding = cfg.embedding(spec.nx, spec.ny, emb_seed)?;
    let net_config = cfg.network(embedding.dim(), net_seed)?;
    let z = embedding.embed_grid(spec.nx, spec.ny);
    let gram = ntk::limiting_ntk(&net_config, &z).map_err(ntk_error)?;
    let s = ntk::spectrum(&gram, k).map_err(ntk_error)?;
    std::fs::create_dir_all(&cfg.out)?;
    let rows: Vec<Vec<String>> = s
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), fmt_f64(v)])
        .collect();
    write_csv(&cfg.out.join("eigenvalues.csv"), &["rank", "eigenvalue"], &rows)?;
    for (i, vec) in s.eigenvectors.iter().enumerate() {
        write_pgm(
            &cfg.out.join(format!("eigenimage_{i:02}.pgm")),
            spec.nx,
            spec.ny,
            &field_to_pixels(vec, spec.nx, spec.ny),
        )?;
    }
    Ok(())
}

pub fn cmd_radius(cfg: &RunConfig) -> Result<(), CmdError> {
    std::fs::create_dir_all(&cfg.out)?;
    match cfg.radius_kind()? {
        EmbeddingKind::Gaussian | EmbeddingKind::None => {
            let ells = cfg.radius_ells()?;
            if ells.is_empty() {
                return Err(CmdError::Config(
                    "invalid config at [radius] ells: empty sweep range".into(),
                ));
            }
            let beta = cfg.radius_beta_default()?;
            let scan_override = cfg.radius_scan_max()?;
            let mut rows = Vec::new();
            for &ell in &ells {
                if !(ell > 0.0) {
                    return Err(CmdError::Config(format!(
                        "invalid config at [radius] ells: length scale must be positive, got {ell}"
                    )));
                }
                let profile = profile_gaussian(beta, ell);
                let scan = scan_override.unwrap_or(profile.scan_max);
                let r = half_max_radius(&profile, scan).map_err(ntk_error)?;
                rows.push(vec![fmt_f64(ell), fmt_f64(r)]);
            }
            write_csv(&cfg.out.join("radius.csv"), &["ell", "r_half"], &rows)?;
        }
        EmbeddingKind::Torus => {
            let betas = cfg.radius_betas()?;
            let omegas = cfg.radius_omegas()?;
            if betas.is_empty() || omegas.is_empty() {
                return Err(CmdError::Config(
                    "invalid config at [radius] betas/omegas: empty sweep range".into(),
                ));
            }
            let delta = cfg.radius_torus_delta()?;
            let scan_override = cfg.radius_scan_max()?;
            let mut rows = Vec::new();
            for &beta in &betas {
                for &omega in &omegas {
                    if !(0.0..1.0).contains(&beta) || !(omega > 0.0) {
                        return Err(CmdError::Config(format!(
                            "invalid config at [radius] betas/omegas: bad pair ({beta}, {omega})"
                        )));
                    }
                    let profile = profile_torus(beta, omega, delta);
                    let scan = scan_override.unwrap_or(profile.scan_max);
                    let r = half_max_radius(&profile, scan).map_err(ntk_error)?;
                    rows.push(vec![fmt_f64(beta), fmt_f64(omega), fmt_f64(r)]);
                }
            }
            write_csv(
                &cfg.out.join("radius.csv"),
                &["beta", "omega", "r_half"],
                &rows,
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct UpsampleSummary {
    factor: usize,
    coarse_nx: usize,
    coarse_ny: usize,
    fine_nx: usize,
    fine_ny: usize,
    volume_fraction: f64,
}

pub fn cmd_upsample(cfg: &RunConfig) -> Result<(), CmdError> {
    let path = cfg.upsample_checkpoint()?;
    let factor = cfg.upsample_factor()?;
    let ckpt = Checkpoint::load(&path).map_err(|e| match e {
        CheckpointError::Io(io) => CmdError::Config(format!(
            "invalid config at [upsample] checkpoint: {}: {io}",
            path.display()
        )),
        other => CmdError::Config(format!(
            "invalid config at [upsample] checkpoint: {other}"
        )),
    })?;
    let field = upsample(
        &ckpt.params,
        &ckpt.config,
        &ckpt.embedding,
        &ckpt.shift,
        factor,
        ckpt.v0,
    )
    .map_err(opt_error)?;
    let (fnx, fny) = (ckpt.shift.nx * factor, ckpt.shift.ny * factor);
    std::fs::create_dir_all(&cfg.out)?;
    write_pgm(
        &cfg.out.join(format!("upsampled_x{factor}.pgm")),
        fnx,
        fny,
        &density_to_pixels(&field.y, fnx, fny),
    )?;
    write_json(
        &cfg.out.join("upsample_summary.json"),
        &UpsampleSummary {
            factor,
            coarse_nx: ckpt.shift.nx,
            coarse_ny: ckpt.shift.ny,
            fine_nx: fnx,
            fine_ny: fny,
            volume_fraction: ckpt.v0 / (ckpt.shift.nx * ckpt.shift.ny) as f64,
        },
    )?;
    Ok(())
}
