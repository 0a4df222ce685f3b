//! TOML run configuration for `simulate`.
//!
//! ```toml
//! name = "reference"
//! taxonomy = "taxonomy.txt"      # relative to this file
//! strategies = ["random", "entropy", "margin", "coreset", "cluster_margin"]
//! repeat = 5
//! seed = 1
//! cold_start_quota = 50
//!
//! [loop]                          # any ALConfig field except strategy/rectify/seed
//! rounds = 5
//! batch = 200
//!
//! [pool]
//! dim = 16
//! classes = ["a", "b"]
//! outside_classes = ["z"]
//! in_distribution = 2000
//! ```
//!
//! Every key has a default, so only `taxonomy`, `pool.classes` and
//! `pool.outside_classes` are required.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::active::{ALConfig, EvalItem, Strategy};
use crate::pool::{ClassSpec, KindCounts, PoolSpec};
use crate::rng;
use crate::taxonomy::ConceptId;

const MEAN: u64 = 0x6d65_616e;
const OUTSIDE: u64 = 0x6f75_7473;
const EVAL: u64 = 0x6576_616c;
const REPEAT: u64 = 0x7265_7074;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{path}`: {message}")]
    Key { path: String, message: String },
    #[error("cannot read config {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl ConfigError {
    fn key(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Key { path: path.to_string(), message: message.into() }
    }

    /// Dotted key path the error refers to, if any.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Key { path, .. } => Some(path),
            ConfigError::Io(..) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSettings {
    pub rounds: usize,
    pub batch: usize,
    pub top_k: usize,
    pub related_levels: usize,
    pub det_min_proposals: usize,
    pub det_max_identical: usize,
    pub votes: usize,
    pub vote_threshold: usize,
    pub annotator_error: f64,
    pub cluster_count: usize,
    pub margin_multiplier: f64,
    pub temperature: f64,
}

impl Default for LoopSettings {
    fn default() -> Self {
        let d = ALConfig::default();
        Self {
            rounds: d.rounds,
            batch: d.batch,
            top_k: d.top_k,
            related_levels: d.related_levels,
            det_min_proposals: d.det_min_proposals,
            det_max_identical: d.det_max_identical,
            votes: d.votes,
            vote_threshold: d.vote_threshold,
            annotator_error: d.annotator_error,
            cluster_count: d.cluster_count,
            margin_multiplier: d.margin_multiplier,
            temperature: d.temperature,
        }
    }
}

/// Synthetic pool layout. Class means are drawn once from `layout_seed`
/// (coordinates `N(0, separation^2)`). Outside class `k` sits halfway
/// between class means `2k` and `2k + 1` (indices mod the class count) plus
/// `N(0, outside_spread^2)` noise, so its samples look like an ambiguous
/// pair of known classes. The evaluation set is fixed by `layout_seed` too;
/// only the pool itself changes between repeats.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSettings {
    pub dim: usize,
    pub classes: Vec<ConceptId>,
    pub outside_classes: Vec<ConceptId>,
    pub sigma: f64,
    /// Spread of outside classes; `sigma` when absent.
    pub outside_sigma: Option<f64>,
    pub separation: f64,
    pub outside_spread: f64,
    pub covariate_scale: f64,
    pub noise_radius: f64,
    pub in_distribution: usize,
    pub noisy: usize,
    pub covariate: usize,
    pub semantic: usize,
    pub eval_per_class: usize,
    pub layout_seed: u64,
}

impl Default for PoolSettings {
    fn default() -> Self {
        Self {
            dim: 16,
            classes: Vec::new(),
            outside_classes: Vec::new(),
            sigma: 1.0,
            outside_sigma: None,
            separation: 1.0,
            outside_spread: 0.5,
            covariate_scale: 4.0,
            noise_radius: 4.0,
            in_distribution: 2000,
            noisy: 1000,
            covariate: 1000,
            semantic: 1000,
            eval_per_class: 100,
            layout_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub taxonomy: PathBuf,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "one")]
    pub repeat: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_quota")]
    pub cold_start_quota: usize,
    #[serde(default, rename = "loop")]
    pub al: LoopSettings,
    pub pool: PoolSettings,
}

fn default_name() -> String {
    "run".to_string()
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn one() -> usize {
    1
}

fn default_quota() -> usize {
    50
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::key("", e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::key(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses `path`; a relative taxonomy path is resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.taxonomy.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.taxonomy = dir.join(&cfg.taxonomy);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.repeat == 0 {
            return Err(ConfigError::key("repeat", "must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::key("strategies", "must not be empty"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ConfigError::key("name", "must be a plain directory name"));
        }
        if self.pool.classes.len() < 2 {
            return Err(ConfigError::key("pool.classes", "need at least two classes"));
        }
        if self.pool.semantic > 0 && self.pool.outside_classes.is_empty() {
            return Err(ConfigError::key("pool.outside_classes", "required when pool.semantic > 0"));
        }
        if self.pool.eval_per_class == 0 {
            return Err(ConfigError::key("pool.eval_per_class", "must be at least 1"));
        }
        self.al_config(Strategy::Random, true, 0)
            .validate()
            .map_err(|e| ConfigError::key("loop", e.to_string()))?;
        self.pool_spec(0).validate().map_err(|e| ConfigError::key("pool", e.to_string()))?;
        Ok(())
    }

    pub fn al_config(&self, strategy: Strategy, rectify: bool, seed: u64) -> ALConfig {
        let l = &self.al;
        ALConfig {
            rounds: l.rounds,
            batch: l.batch,
            strategy,
            rectify,
            top_k: l.top_k,
            related_levels: l.related_levels,
            det_min_proposals: l.det_min_proposals,
            det_max_identical: l.det_max_identical,
            votes: l.votes,
            vote_threshold: l.vote_threshold,
            annotator_error: l.annotator_error,
            cluster_count: l.cluster_count,
            margin_multiplier: l.margin_multiplier,
            temperature: l.temperature,
            seed,
        }
    }

    /// Seed of the `i`-th repeat.
    pub fn repeat_seed(&self, i: usize) -> u64 {
        rng::derive(self.seed, &[REPEAT, i as u64])
    }

    fn class_specs(&self) -> (Vec<ClassSpec>, Vec<ClassSpec>) {
        let p = &self.pool;
        let d = p.dim;
        let classes: Vec<ClassSpec> = p
            .classes
            .iter()
            .enumerate()
            .map(|(c, id)| ClassSpec {
                id: id.clone(),
                mean: (0..d).map(|j| p.separation * rng::gaussian(p.layout_seed, &[MEAN, c as u64, j as u64])).collect(),
                sigma: p.sigma,
            })
            .collect();
        let n = classes.len();
        let outside = p
            .outside_classes
            .iter()
            .enumerate()
            .map(|(k, id)| {
                let (a, b) = (&classes[2 * k % n].mean, &classes[(2 * k + 1) % n].mean);
                (k, id, a, b)
            })
            .map(|(k, id, a, b)| ClassSpec {
                id: id.clone(),
                mean: (0..d)
                    .map(|j| {
                        (a[j] + b[j]) / 2.0 + p.outside_spread * rng::gaussian(p.layout_seed, &[OUTSIDE, k as u64, j as u64])
                    })
                    .collect(),
                sigma: p.outside_sigma.unwrap_or(p.sigma),
            })
            .collect();
        (classes, outside)
    }

    pub fn pool_spec(&self, seed: u64) -> PoolSpec {
        let (classes, outside_classes) = self.class_specs();
        let p = &self.pool;
        PoolSpec {
            classes,
            counts: KindCounts {
                in_distribution: p.in_distribution,
                noisy: p.noisy,
                covariate: p.covariate,
                semantic: p.semantic,
            },
            covariate_scale: p.covariate_scale,
            noise_radius: p.noise_radius,
            dim: p.dim,
            outside_classes,
            seed,
        }
    }

    /// Held-out in-distribution set, identical for every repeat.
    pub fn eval_set(&self) -> Vec<EvalItem> {
        let mut spec = self.pool_spec(rng::derive(self.pool.layout_seed, &[EVAL]));
        spec.counts = KindCounts { in_distribution: self.pool.eval_per_class * spec.classes.len(), ..Default::default() };
        crate::pool::generate_pool(&spec)
            .expect("validated spec")
            .into_iter()
            .map(|s| EvalItem { features: s.features, truth: s.query })
            .collect()
    }
}
