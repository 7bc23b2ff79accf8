//! Binary checkpoint of a trained model: everything needed to re-evaluate
//! the density field at any resolution.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes   "TOPOCKPT"
//! version    u32       1
//! emb_kind   u32       0 identity | 1 torus | 2 gaussian
//!   torus:     r f64, delta f64
//!   gaussian:  n0 u32, ell f64, phase_mode u32 (0 zero | 1 uniform), seed u64
//! act_kind   u32       0 relu | 1 cosine | 2 identity
//! omega      f64       0.0 unless cosine
//! beta       f64
//! n_sizes    u32, then layer sizes as u32 each
//! net_seed   u64
//! nx u32, ny u32, v0 f64, c f64
//! f0         f64 * (nx * ny)    frozen initial outputs, element order
//! n_params   u64, then parameters as f64 in flatten order
//! ```
//!
//! Random embeddings are stored as their seed and hyperparameters and are
//! regenerated on load; the seeded generator makes that reconstruction
//! bit-exact.

use crate::embed::{Embedding, GaussianEmbedding, PhaseMode};
use crate::net::{Activation, NetworkConfig, NetworkParams, ShiftedField};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"TOPOCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// A trained model with its embedding, shift field, and volume target.
#[derive(Debug)]
pub struct Checkpoint {
    pub embedding: Embedding,
    pub config: NetworkConfig,
    pub params: NetworkParams,
    pub shift: ShiftedField,
    pub v0: f64,
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut w = Writer(BufWriter::new(File::create(path)?));
        w.0.write_all(MAGIC)?;
        w.u32(VERSION)?;
        match &self.embedding {
            Embedding::Identity => w.u32(0)?,
            Embedding::Torus { r, delta } => {
                w.u32(1)?;
                w.f64(*r)?;
                w.f64(*delta)?;
            }
            Embedding::Gaussian(g) => {
                w.u32(2)?;
                w.u32(g.n0 as u32)?;
                w.f64(g.ell)?;
                w.u32(match g.phase_mode {
                    PhaseMode::Zero => 0,
                    PhaseMode::Uniform => 1,
                })?;
                w.u64(g.seed)?;
            }
        }
        let (act, omega) = match self.config.activation {
            Activation::StandardizedRelu => (0u32, 0.0),
            Activation::StandardizedCosine { omega } => (1, omega),
            Activation::Identity => (2, 0.0),
        };
        w.u32(act)?;
        w.f64(omega)?;
        w.f64(self.config.beta)?;
        w.u32(self.config.layer_sizes.len() as u32)?;
        for &s in &self.config.layer_sizes {
            w.u32(s as u32)?;
        }
        w.u64(self.config.seed)?;
        w.u32(self.shift.nx as u32)?;
        w.u32(self.shift.ny as u32)?;
        w.f64(self.v0)?;
        w.f64(self.shift.c)?;
        for &v in &self.shift.f0 {
            w.f64(v)?;
        }
        let flat = self.params.flatten();
        w.u64(flat.len() as u64)?;
        for &v in &flat {
            w.f64(v)?;
        }
        w.0.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut r = Reader(BufReader::new(File::open(path)?));
        let mut magic = [0u8; 8];
        r.0.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let embedding = match r.u32()? {
            0 => Embedding::Identity,
            1 => Embedding::Torus {
                r: r.f64()?,
                delta: r.f64()?,
            },
            2 => {
                let n0 = r.u32()? as usize;
                let ell = r.f64()?;
                let phase_mode = match r.u32()? {
                    0 => PhaseMode::Zero,
                    1 => PhaseMode::Uniform,
                    k => return Err(CheckpointError::Malformed(format!("phase mode {k}"))),
                };
                let seed = r.u64()?;
                Embedding::Gaussian(GaussianEmbedding::new(n0, ell, seed, phase_mode))
            }
            k => return Err(CheckpointError::Malformed(format!("embedding kind {k}"))),
        };
        let act_kind = r.u32()?;
        let omega = r.f64()?;
        let activation = match act_kind {
            0 => Activation::StandardizedRelu,
            1 => Activation::StandardizedCosine { omega },
            2 => Activation::Identity,
            k => return Err(CheckpointError::Malformed(format!("activation kind {k}"))),
        };
        let beta = r.f64()?;
        let n_sizes = r.u32()? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(CheckpointError::Malformed(format!(
                "implausible layer count {n_sizes}"
            )));
        }
        let mut layer_sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            layer_sizes.push(r.u32()? as usize);
        }
        let seed = r.u64()?;
        let config = NetworkConfig::new(layer_sizes, beta, activation, seed)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let v0 = r.f64()?;
        let c = r.f64()?;
        if nx == 0 || ny == 0 || nx * ny > (1 << 28) {
            return Err(CheckpointError::Malformed(format!("grid {nx} x {ny}")));
        }
        let mut f0 = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            f0.push(r.f64()?);
        }
        let shift = ShiftedField { f0, c, nx, ny };
        let n_params = r.u64()? as usize;
        if n_params != config.param_count() {
            return Err(CheckpointError::Malformed(format!(
                "parameter count {n_params} does not match the architecture ({})",
                config.param_count()
            )));
        }
        let mut flat = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            flat.push(r.f64()?);
        }
        let params = NetworkParams::from_flat(&config, &flat)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        Ok(Self {
            embedding,
            config,
            params,
            shift,
            v0,
        })
    }
}
