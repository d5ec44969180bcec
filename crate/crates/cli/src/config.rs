//! TOML experiment configuration.
//!
//! ```toml
//! seed = 42
//! episodes = 200
//! delta = 0.1
//! threshold = "heuristic"
//! rules = ["ttucb", "t3c"]
//!
//! [[families]]
//! kind = "random-k10"
//!
//! [output]
//! dir = "out/fig1"
//! ```

use std::path::{Path, PathBuf};

use bai_core::numerics::ThresholdKind;
use bai_core::rules::RuleConfig;
use bai_core::sim::{
    EpisodeSettings, ExperimentSpec, InstanceFamily, DEFAULT_CHECKPOINT_EVERY, DEFAULT_MAX_STEPS,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Episodes per family; every rule runs on the same draws.
    pub episodes: usize,
    pub delta: f64,
    pub threshold: ThresholdKind,
    pub rules: Vec<String>,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Spacing of the error-before-stopping checkpoints, in samples.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    /// Record per-episode wall-clock time. Off by default so reruns are
    /// byte-identical.
    #[serde(default)]
    pub timing: bool,
    pub families: Vec<InstanceFamily>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_checkpoint_every() -> u64 {
    DEFAULT_CHECKPOINT_EVERY
}

/// Where `run` writes its files. File names are relative to `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub episodes: String,
    pub summary: String,
    pub error_curves: String,
    pub manifest: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            episodes: "episodes.csv".into(),
            summary: "summary.csv".into(),
            error_curves: "error_curves.csv".into(),
            manifest: "manifest.json".into(),
        }
    }
}

impl OutputConfig {
    pub fn episodes_path(&self) -> PathBuf {
        self.dir.join(&self.episodes)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join(&self.summary)
    }

    pub fn error_curves_path(&self) -> PathBuf {
        self.dir.join(&self.error_curves)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(&self.manifest)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical serialization; comments and layout of the source file are lost.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, msg: String| Err(CliError::Usage(format!("invalid config key `{key}`: {msg}")));
        if self.episodes == 0 {
            return bad("episodes", "must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every", "must be at least 1".into());
        }
        if self.rules.is_empty() {
            return bad("rules", "at least one rule is required".into());
        }
        for (i, name) in self.rules.iter().enumerate() {
            if let Err(e) = name.parse::<RuleConfig>() {
                return bad(&format!("rules[{i}]"), e.to_string());
            }
        }
        if self.families.is_empty() {
            return bad("families", "at least one family is required".into());
        }
        for (i, family) in self.families.iter().enumerate() {
            if let Err(e) = family.validate() {
                return bad(&format!("families[{i}]"), e.to_string());
            }
            if self.max_steps <= family.num_arms() as u64 {
                return bad(
                    "max_steps",
                    format!("must exceed the number of arms of {family}, got {}", self.max_steps),
                );
            }
        }
        Ok(())
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        let jobs = match self.jobs {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        ExperimentSpec {
            families: self.families.clone(),
            rules: self.rules.clone(),
            settings: EpisodeSettings {
                delta: self.delta,
                threshold: self.threshold,
                max_steps: self.max_steps,
                checkpoint_every: Some(self.checkpoint_every),
            },
            episodes: self.episodes,
            seed: self.seed,
            jobs,
            timing: self.timing,
        }
    }
}
