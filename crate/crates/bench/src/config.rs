//! Experiment configuration, loaded from JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stl2vec::embedding::{DatasetConfig, SkipGramConfig};
use stl2vec::policy::TrainConfig;
use stl2vec::stl::RobustnessMode;
use stl2vec::trajopt::OptConfig;
use thiserror::Error;

use crate::catalog::SpecSelection;
use crate::world::{RegionMap, Unicycle};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Lower bounds on `(v, omega)`.
    pub u_lo: [f64; 2],
    pub u_hi: [f64; 2],
    /// Trajectory horizon `T` for optimization and rollouts.
    pub horizon: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            u_lo: [0.0, -0.5],
            u_hi: [1.0, 0.5],
            horizon: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub beta: f64,
    pub max_iters: usize,
    pub lr: f64,
    pub restarts: usize,
    pub vicinity: f64,
    pub init_sigma: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = OptConfig::default();
        OptimizerConfig {
            beta: d.beta,
            max_iters: d.max_iters,
            lr: d.lr,
            restarts: d.restarts,
            vicinity: d.vicinity,
            init_sigma: d.init_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Embedding dimension `N`.
    pub dim: usize,
    /// Context size `P`.
    pub context: usize,
    /// Optimizations per spec, `N_ite`.
    pub iterations: usize,
    pub tie_cap: usize,
    pub discard_failures: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerConfig,
    /// Specs listed in the similarity report; all when absent.
    pub queries: Option<Vec<usize>>,
    pub neighbors: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 20,
            context: 2,
            iterations: 1,
            tie_cap: 20,
            discard_failures: false,
            epochs: 2000,
            lr: 1.0,
            batch_size: None,
            optimizer: OptimizerConfig::default(),
            queries: None,
            neighbors: 4,
        }
    }
}

/// Serialized form of [`RobustnessMode`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModeConfig {
    Exact,
    Smooth { beta: f64 },
}

impl From<ModeConfig> for RobustnessMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Exact => RobustnessMode::Exact,
            ModeConfig::Smooth { beta } => RobustnessMode::Smooth { beta },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingKind {
    #[serde(rename = "stl2vec")]
    Stl2vec,
    #[serde(rename = "integer")]
    Integer,
    #[serde(rename = "onehot")]
    OneHot,
    #[serde(rename = "one-by-one")]
    OneByOne,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 4] = [
        EncodingKind::Stl2vec,
        EncodingKind::Integer,
        EncodingKind::OneHot,
        EncodingKind::OneByOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::Stl2vec => "stl2vec",
            EncodingKind::Integer => "integer",
            EncodingKind::OneHot => "onehot",
            EncodingKind::OneByOne => "one-by-one",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EncodingKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown encoding {s:?}; expected stl2vec, integer, onehot or one-by-one"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub hidden: usize,
    pub layers: usize,
    /// Specs per batch, `N_b`.
    pub batch_size: usize,
    /// Initial states per spec and batch, `L`.
    pub init_states: usize,
    pub epochs: usize,
    pub lr: f64,
    pub mode: ModeConfig,
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Controllers trained by the pipeline.
    pub encodings: Vec<EncodingKind>,
    /// Evaluation rollouts dumped per spec.
    pub rollouts_per_spec: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let d = TrainConfig::default();
        ControllerConfig {
            hidden: d.hidden,
            layers: d.layers,
            batch_size: d.batch_size,
            init_states: d.init_states,
            epochs: d.epochs,
            lr: d.lr,
            mode: ModeConfig::Exact,
            eval_every: d.eval_every,
            eval_samples: d.eval_samples,
            encodings: vec![EncodingKind::Stl2vec],
            rollouts_per_spec: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub regions: RegionMap,
    #[serde(default = "default_specs")]
    pub specs: SpecSelection,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub seeds: SeedConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_specs() -> SpecSelection {
    SpecSelection::Training
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            regions: RegionMap::default(),
            specs: default_specs(),
            embedding: EmbeddingConfig::default(),
            controller: ControllerConfig::default(),
            seeds: SeedConfig { master: seed },
            output_dir: default_output(),
        }
    }

    /// Accepts a bare config or a `config.json` artifact wrapping one under
    /// `config`.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seeds.master
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        let s = &self.system;
        if !(0..2).all(|k| s.u_lo[k].is_finite() && s.u_hi[k].is_finite() && s.u_lo[k] < s.u_hi[k]) {
            return bad("system: u_lo must be strictly below u_hi");
        }
        if s.horizon == 0 {
            return bad("system: horizon must be positive");
        }
        let r = &self.regions;
        if r.regions.is_empty() {
            return bad("regions: at least one region is required");
        }
        if r.regions
            .iter()
            .chain([&r.x0])
            .any(|b| !(b.xlo < b.xhi && b.ylo < b.yhi))
        {
            return bad("regions: empty rectangle");
        }
        let e = &self.embedding;
        if e.dim == 0 || e.context == 0 || e.iterations == 0 || e.neighbors == 0 {
            return bad("embedding: dim, context, iterations and neighbors must be positive");
        }
        if !(e.lr > 0.0) || !(e.optimizer.lr > 0.0) || !(e.optimizer.beta > 0.0) || e.optimizer.restarts == 0 {
            return bad("embedding: learning rates, beta and restarts must be positive");
        }
        let c = &self.controller;
        if c.hidden == 0 || c.layers == 0 || c.batch_size == 0 || c.init_states == 0 || c.eval_samples == 0 {
            return bad("controller: sizes must be positive");
        }
        if c.eval_every == 0 {
            return bad("controller: eval_every must be positive");
        }
        if !(c.lr >= 0.0) {
            return bad("controller: lr must be non-negative");
        }
        if let ModeConfig::Smooth { beta } = c.mode {
            if !(beta > 0.0 && beta.is_finite()) {
                return bad("controller: smooth beta must be positive");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON, output directory excluded, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dynamics(&self) -> Unicycle {
        Unicycle::new(self.system.u_lo, self.system.u_hi).expect("validated bounds")
    }

    pub fn opt_config(&self) -> OptConfig {
        let o = &self.embedding.optimizer;
        OptConfig {
            horizon: self.system.horizon,
            beta: o.beta,
            max_iters: o.max_iters,
            lr: o.lr,
            restarts: o.restarts,
            vicinity: o.vicinity,
            init_sigma: o.init_sigma,
            seed: self.seed(),
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let e = &self.embedding;
        DatasetConfig {
            context: e.context,
            iterations: e.iterations,
            tie_cap: e.tie_cap,
            discard_failures: e.discard_failures,
            opt: self.opt_config(),
            seed: self.seed(),
        }
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        let e = &self.embedding;
        SkipGramConfig {
            dim: e.dim,
            epochs: e.epochs,
            lr: e.lr,
            batch_size: e.batch_size,
            seed: self.seed(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let c = &self.controller;
        TrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            init_states: c.init_states,
            lr: c.lr,
            mode: c.mode.into(),
            seed: self.seed(),
            eval_every: c.eval_every,
            eval_samples: c.eval_samples,
            horizon: self.system.horizon,
            hidden: c.hidden,
            layers: c.layers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seeds": {"master": 3}}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(3));
        assert_eq!(cfg.train_config().seed, 3);
        assert_eq!(cfg.dataset_config().opt.horizon, 20);
    }

    #[test]
    fn seeds_are_required_and_unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json("{}").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds": {"master": 1}, "typo": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds": {"master": 1}, "specs": {"set": "bogus"}}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ExperimentConfig::new(0);
        cfg.system.u_lo = [1.0, 0.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(0);
        cfg.controller.mode = ModeConfig::Smooth { beta: 0.0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn round_trip_and_wrapped_form() {
        let mut cfg = ExperimentConfig::new(9);
        cfg.controller.mode = ModeConfig::Smooth { beta: 4.0 };
        cfg.controller.encodings = vec![EncodingKind::OneHot, EncodingKind::OneByOne];
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains(r#""one-by-one""#) && json.contains(r#""kind":"smooth""#));
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), cfg);
        let wrapped = format!(r#"{{"config_hash": "x", "seed": 9, "config": {json}}}"#);
        assert_eq!(ExperimentConfig::from_json(&wrapped).unwrap(), cfg);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::new(1);
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.seeds.master = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn encoding_names_parse() {
        for k in EncodingKind::ALL {
            assert_eq!(k.name().parse::<EncodingKind>().unwrap(), k);
        }
        assert!("lstm".parse::<EncodingKind>().is_err());
    }
}
