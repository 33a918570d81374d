//! Seeded Monte-Carlo experiments, CSV/SVG output and diagnostics.

pub mod diagnostics;
mod experiment;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{InstanceError, InstanceSpec};
use crate::policies::{PolicyConfig, PolicyError};
use crate::regret::TraceError;

pub use experiment::{run_experiment, AggregateRow, ExperimentResult};
pub use svg::render_svg;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn default_stride() -> u64 {
    100
}

/// An experiment: one instance, several policies, `replications` runs each.
///
/// Each policy runs on the instance under its own resolved setting, so one
/// config can compare censored and uncensored variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub policies: Vec<PolicyConfig>,
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub checkpoint_stride: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::Invalid("replications must be at least 1".into()));
        }
        if self.checkpoint_stride == 0 {
            return Err(HarnessError::Invalid("checkpoint_stride must be positive".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Invalid("no policies".into()));
        }
        let instance = crate::environment::BanditInstance::from_spec(&self.instance)?;
        let mut labels = Vec::new();
        for p in &self.policies {
            p.validate()?;
            p.resolve_setting(&instance)?;
            let label = p.label(&instance);
            if labels.contains(&label) {
                return Err(HarnessError::Invalid(format!("duplicate policy label `{label}`; set `name`")));
            }
            labels.push(label);
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `run` of policy `policy`:
/// `splitmix64(splitmix64(splitmix64(master) ^ policy) ^ run)`.
pub fn child_seed(master: u64, policy: u64, run: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ policy) ^ run)
}
