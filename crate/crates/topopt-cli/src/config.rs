//! Flat INI-style run configuration.
//!
//! Sections group related keys (`[problem]`, `[method]`, `[embedding]`,
//! `[network]`, `[optimizer]`, `[filter]`, `[run]`, plus per-command sections
//! `[ntk]`, `[spectrum]`, `[radius]`, `[upsample]`). Values are bare strings;
//! `#` and `;` start comments. Every error names the offending
//! `[section] key` so misconfigured runs fail before any compute.

// Negated float comparisons reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use topopt_core::embed::{Embedding, GaussianEmbedding, PhaseMode};
use topopt_core::fea::{presets, ProblemSpec};
use topopt_core::net::{Activation, NetworkConfig};
use topopt_core::opt::Optimizer;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nn,
    Mf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Torus,
    Gaussian,
    None,
}

/// Parsed configuration: the raw key-value tables plus the resolved output
/// directory and master seed (both overridable from the command line).
#[derive(Debug, Clone)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config file", format!("{}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find(['#', ';']) {
                Some(at) => &raw[..at],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_ascii_lowercase();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            if current.is_empty() {
                return Err(ConfigError::new(
                    format!("line {}", lineno + 1),
                    "key outside of any [section]",
                ));
            }
            let key = key.trim().to_ascii_lowercase();
            let section = sections.get_mut(&current).expect("section exists");
            if section
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::new(
                    format!("[{current}] {key}"),
                    "duplicate key",
                ));
            }
        }
        let mut cfg = Self {
            sections,
            out: PathBuf::from("out"),
            seed: 0,
        };
        if let Some(out) = cfg.get("run", "out") {
            cfg.out = PathBuf::from(out);
        }
        cfg.seed = cfg.f64_like_u64("run", "seed", 0)?;
        Ok(cfg)
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|s| s.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| ConfigError::new(format!("[{section}] {key}"), "missing key"))
    }

    fn f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let raw = self.require(section, key)?;
        raw.parse::<f64>()
            .map_err(|_| ConfigError::new(format!("[{section}] {key}"), format!("`{raw}` is not a number")))
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            Some(_) => self.f64(section, key),
            None => Ok(default),
        }
    }

    fn usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        let raw = self.require(section, key)?;
        raw.parse::<usize>().map_err(|_| {
            ConfigError::new(
                format!("[{section}] {key}"),
                format!("`{raw}` is not a nonnegative integer"),
            )
        })
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            Some(_) => self.usize(section, key),
            None => Ok(default),
        }
    }

    fn f64_like_u64(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => raw.parse::<u64>().map_err(|_| {
                ConfigError::new(
                    format!("[{section}] {key}"),
                    format!("`{raw}` is not an unsigned integer"),
                )
            }),
        }
    }

    fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(section, key)?;
        raw.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    ConfigError::new(
                        format!("[{section}] {key}"),
                        format!("`{s}` is not a number"),
                    )
                })
            })
            .collect()
    }

    /// All key-value pairs, flattened as `section.key` for the summary echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        for (section, keys) in &self.sections {
            for (key, value) in keys {
                map.insert(format!("{section}.{key}"), value.clone());
            }
        }
        map
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        let nx = self.usize("problem", "nx")?;
        let ny = self.usize("problem", "ny")?;
        if nx == 0 || ny == 0 {
            return Err(ConfigError::new("[problem] nx", "grid must be nonempty"));
        }
        let n = (nx * ny) as f64;
        let v0 = match (self.get("problem", "volfrac"), self.get("problem", "v0")) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "[problem] volfrac",
                    "give either volfrac or v0, not both",
                ))
            }
            (Some(_), None) => {
                let f = self.f64("problem", "volfrac")?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(ConfigError::new(
                        "[problem] volfrac",
                        format!("V0 fraction must lie in (0, 1), got {f}"),
                    ));
                }
                f * n
            }
            (None, Some(_)) => self.f64("problem", "v0")?,
            (None, None) => {
                return Err(ConfigError::new(
                    "[problem] volfrac",
                    "missing volume target (volfrac or v0)",
                ))
            }
        };
        if !(v0 > 0.0 && v0 < n) {
            return Err(ConfigError::new(
                "[problem] v0",
                format!("V0 must satisfy 0 < V0 < N = {n}, got {v0}"),
            ));
        }
        let preset = self
            .get("problem", "preset")
            .unwrap_or("mbb")
            .to_ascii_lowercase();
        let volfrac = v0 / n;
        let spec = match preset.as_str() {
            "mbb" => presets::mbb(nx, ny, volfrac),
            "cantilever" => presets::cantilever(nx, ny, volfrac),
            "bridge" => presets::bridge(nx, ny, volfrac),
            "custom" => {
                let fixed: Vec<usize> = self
                    .require("problem", "fixed_dofs")?
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<usize>().map_err(|_| {
                            ConfigError::new(
                                "[problem] fixed_dofs",
                                format!("`{s}` is not a dof index"),
                            )
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let loads: Vec<(usize, f64)> = self
                    .require("problem", "loads")?
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|pair| {
                        let (d, v) = pair.split_once(':').ok_or_else(|| {
                            ConfigError::new(
                                "[problem] loads",
                                format!("`{pair}` is not `dof:value`"),
                            )
                        })?;
                        let dof = d.trim().parse::<usize>().map_err(|_| {
                            ConfigError::new(
                                "[problem] loads",
                                format!("`{d}` is not a dof index"),
                            )
                        })?;
                        let val = v.trim().parse::<f64>().map_err(|_| {
                            ConfigError::new("[problem] loads", format!("`{v}` is not a number"))
                        })?;
                        Ok((dof, val))
                    })
                    .collect::<Result<_, ConfigError>>()?;
                ProblemSpec::new(nx, ny, fixed, loads, v0)
            }
            other => {
                return Err(ConfigError::new(
                    "[problem] preset",
                    format!("unknown preset `{other}` (mbb | cantilever | bridge | custom)"),
                ))
            }
        }
        .map_err(|e| ConfigError::new("[problem]", e.to_string()))?;
        spec.with_material(
            self.f64_or("problem", "e0", 1.0)?,
            self.f64_or("problem", "emin", 1e-9)?,
            self.f64_or("problem", "nu", 0.3)?,
            self.f64_or("problem", "penal", 3.0)?,
        )
        .map_err(|e| ConfigError::new("[problem]", e.to_string()))
    }

    pub fn method(&self) -> Result<Method, ConfigError> {
        match self
            .get("method", "kind")
            .unwrap_or("nn")
            .to_ascii_lowercase()
            .as_str()
        {
            "nn" => Ok(Method::Nn),
            "mf" => Ok(Method::Mf),
            other => Err(ConfigError::new(
                "[method] kind",
                format!("unsupported method `{other}` (nn | mf)"),
            )),
        }
    }

    pub fn embedding_kind(&self) -> Result<EmbeddingKind, ConfigError> {
        match self
            .get("embedding", "kind")
            .unwrap_or("gaussian")
            .to_ascii_lowercase()
            .as_str()
        {
            "torus" => Ok(EmbeddingKind::Torus),
            "gaussian" => Ok(EmbeddingKind::Gaussian),
            "none" | "identity" => Ok(EmbeddingKind::None),
            other => Err(ConfigError::new(
                "[embedding] kind",
                format!("unknown embedding `{other}` (torus | gaussian | none)"),
            )),
        }
    }

    /// Build the embedding for an `nx x ny` grid from its config section.
    pub fn embedding(&self, nx: usize, ny: usize, seed: u64) -> Result<Embedding, ConfigError> {
        match self.embedding_kind()? {
            EmbeddingKind::None => Ok(Embedding::Identity),
            EmbeddingKind::Torus => {
                let r = self.f64_or("embedding", "r", 2.0_f64.sqrt())?;
                let default_delta = std::f64::consts::PI / (2.0 * nx.max(ny) as f64);
                let delta = self.f64_or("embedding", "delta", default_delta)?;
                if !(r > 0.0) {
                    return Err(ConfigError::new("[embedding] r", "radius must be positive"));
                }
                if !(delta > 0.0 && delta <= std::f64::consts::PI) {
                    return Err(ConfigError::new(
                        "[embedding] delta",
                        format!("delta must lie in (0, pi], got {delta}"),
                    ));
                }
                Ok(Embedding::Torus { r, delta })
            }
            EmbeddingKind::Gaussian => {
                let n0 = self.usize_or("embedding", "n0", 1000)?;
                let ell = self.f64_or("embedding", "ell", 4.0)?;
                if n0 == 0 {
                    return Err(ConfigError::new("[embedding] n0", "dimension must be positive"));
                }
                if !(ell > 0.0) {
                    return Err(ConfigError::new(
                        "[embedding] ell",
                        "length scale must be positive",
                    ));
                }
                let phases = match self
                    .get("embedding", "phases")
                    .unwrap_or("zero")
                    .to_ascii_lowercase()
                    .as_str()
                {
                    "zero" => PhaseMode::Zero,
                    "uniform" => PhaseMode::Uniform,
                    other => {
                        return Err(ConfigError::new(
                            "[embedding] phases",
                            format!("unknown phase mode `{other}` (zero | uniform)"),
                        ))
                    }
                };
                Ok(Embedding::Gaussian(GaussianEmbedding::new(
                    n0, ell, seed, phases,
                )))
            }
        }
    }

    /// Network config; per-embedding defaults follow the reported setups
    /// (one hidden ReLU layer for the Gaussian embedding, two hidden cosine
    /// layers for the torus).
    pub fn network(&self, input_dim: usize, seed: u64) -> Result<NetworkConfig, ConfigError> {
        let kind = self.embedding_kind()?;
        let default_hidden = match kind {
            EmbeddingKind::Torus => vec![1000, 1000],
            _ => vec![1000],
        };
        let hidden: Vec<usize> = match self.get("network", "hidden") {
            None => default_hidden,
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>().map_err(|_| {
                        ConfigError::new(
                            "[network] hidden",
                            format!("`{s}` is not a layer size"),
                        )
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        let default_beta = match kind {
            EmbeddingKind::Torus => 0.1,
            _ => 0.5,
        };
        let beta = self.f64_or("network", "beta", default_beta)?;
        let activation = match self
            .get("network", "activation")
            .map(|s| s.to_ascii_lowercase())
            .unwrap_or_else(|| match kind {
                EmbeddingKind::Torus => "cosine".to_string(),
                _ => "relu".to_string(),
            })
            .as_str()
        {
            "relu" => Activation::StandardizedRelu,
            "cosine" => Activation::StandardizedCosine {
                omega: self.f64_or("network", "omega", 5.0)?,
            },
            "identity" => Activation::Identity,
            other => {
                return Err(ConfigError::new(
                    "[network] activation",
                    format!("unknown activation `{other}` (relu | cosine | identity)"),
                ))
            }
        };
        let mut sizes = vec![input_dim];
        sizes.extend(hidden);
        sizes.push(1);
        NetworkConfig::new(sizes, beta, activation, seed)
            .map_err(|e| ConfigError::new("[network]", e.to_string()))
    }

    pub fn optimizer(&self) -> Result<Optimizer, ConfigError> {
        let lr = self.f64_or("optimizer", "lr", 1e-3)?;
        if !(lr > 0.0) {
            return Err(ConfigError::new(
                "[optimizer] lr",
                format!("step size must be positive, got {lr}"),
            ));
        }
        match self
            .get("optimizer", "kind")
            .unwrap_or("rprop")
            .to_ascii_lowercase()
            .as_str()
        {
            "gd" => Ok(Optimizer::gd(lr)),
            "adam" => Ok(Optimizer::adam(lr)),
            "rprop" => Ok(Optimizer::rprop(lr)),
            other => {
                Err(ConfigError::new(
                    "[optimizer] kind",
                    format!("unsupported optimizer `{other}` (gd | adam | rprop)"),
                ))
            }
        }
    }

    pub fn iters(&self) -> Result<usize, ConfigError> {
        self.usize_or("run", "iters", 300)
    }

    pub fn ntk_drift_every(&self) -> Result<Option<usize>, ConfigError> {
        let every = self.usize_or("run", "ntk_drift_every", 0)?;
        Ok(if every == 0 { None } else { Some(every) })
    }

    pub fn filter_rmin(&self) -> Result<f64, ConfigError> {
        let rmin = self.f64_or("filter", "rmin", 2.4)?;
        if !(rmin >= 1.0) {
            return Err(ConfigError::new(
                "[filter] rmin",
                format!("filter radius must be at least 1, got {rmin}"),
            ));
        }
        Ok(rmin)
    }

    pub fn ntk_mode(&self) -> Result<String, ConfigError> {
        let mode = self
            .get("ntk", "mode")
            .unwrap_or("limiting")
            .to_ascii_lowercase();
        match mode.as_str() {
            "empirical" | "limiting" | "compare" => Ok(mode),
            other => Err(ConfigError::new(
                "[ntk] mode",
                format!("unknown mode `{other}` (empirical | limiting | compare)"),
            )),
        }
    }

    pub fn spectrum_k(&self) -> Result<usize, ConfigError> {
        self.usize_or("spectrum", "k", 10)
    }

    pub fn radius_kind(&self) -> Result<EmbeddingKind, ConfigError> {
        match self
            .get("radius", "kind")
            .unwrap_or("gaussian")
            .to_ascii_lowercase()
            .as_str()
        {
            "gaussian" => Ok(EmbeddingKind::Gaussian),
            "torus" => Ok(EmbeddingKind::Torus),
            other => Err(ConfigError::new(
                "[radius] kind",
                format!("unknown sweep kind `{other}` (gaussian | torus)"),
            )),
        }
    }

    pub fn radius_ells(&self) -> Result<Vec<f64>, ConfigError> {
        self.f64_list("radius", "ells")
    }

    pub fn radius_betas(&self) -> Result<Vec<f64>, ConfigError> {
        self.f64_list("radius", "betas")
    }

    pub fn radius_omegas(&self) -> Result<Vec<f64>, ConfigError> {
        self.f64_list("radius", "omegas")
    }

    /// Discretization angle for torus radius sweeps; the default matches a
    /// 40 x 40 grid.
    pub fn radius_torus_delta(&self) -> Result<f64, ConfigError> {
        let delta = self.f64_or("radius", "delta", std::f64::consts::PI / 80.0)?;
        if !(delta > 0.0 && delta <= std::f64::consts::PI) {
            return Err(ConfigError::new(
                "[radius] delta",
                format!("delta must lie in (0, pi], got {delta}"),
            ));
        }
        Ok(delta)
    }

    /// Optional scan-range override; each profile carries its own default.
    pub fn radius_scan_max(&self) -> Result<Option<f64>, ConfigError> {
        match self.get("radius", "scan_max") {
            None => Ok(None),
            Some(_) => {
                let v = self.f64("radius", "scan_max")?;
                if !(v > 0.0) {
                    return Err(ConfigError::new(
                        "[radius] scan_max",
                        "scan range must be positive",
                    ));
                }
                Ok(Some(v))
            }
        }
    }

    pub fn radius_beta_default(&self) -> Result<f64, ConfigError> {
        self.f64_or("radius", "beta", 0.5)
    }

    pub fn upsample_checkpoint(&self) -> Result<PathBuf, ConfigError> {
        Ok(PathBuf::from(self.require("upsample", "checkpoint")?))
    }

    pub fn upsample_factor(&self) -> Result<usize, ConfigError> {
        let f = self.usize_or("upsample", "factor", 1)?;
        if f == 0 {
            return Err(ConfigError::new(
                "[upsample] factor",
                "factor must be at least 1",
            ));
        }
        Ok(f)
    }

    pub fn ntk_width(&self) -> Result<Option<usize>, ConfigError> {
        match self.get("ntk", "width") {
            None => Ok(None),
            Some(_) => Ok(Some(self.usize("ntk", "width")?)),
        }
    }
}
