//! Arm-selection strategies.
//!
//! Every policy sees, when choosing the arm of round `t`, the pulls and
//! disclosures of rounds `1..t` (fed through [`Policy::update`]).

mod agnostic;
mod delayed;
mod indices;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{BanditInstance, FeedbackBatch};

pub use agnostic::{CensoredCdfEstimator, DelayBeyondWindow, MeanDelayEstimator};
pub use delayed::{CountSource, IndexFamily, IndexPolicy};
pub use indices::{argmax_lowest, discarding_indices, exploration_budget, klucb_index, ucb_index, DiscardingIndices};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.7;

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Arm (0-based) to play at round `t >= 1`.
    fn select_arm(&mut self, t: u64) -> usize;

    /// Reports the arm played in the last round and what was revealed.
    fn update(&mut self, arm: usize, feedback: &FeedbackBatch);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    DelayedUcb,
    DelayedKlucb,
    DiscardingUcb,
    DiscardingKlucb,
    AgnosticDelayedKlucb,
    Oracle,
    Uniform,
    RoundRobin,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DelayedUcb => "delayed_ucb",
            Self::DelayedKlucb => "delayed_klucb",
            Self::DiscardingUcb => "discarding_ucb",
            Self::DiscardingKlucb => "discarding_klucb",
            Self::AgnosticDelayedKlucb => "agnostic_delayed_klucb",
            Self::Oracle => "oracle",
            Self::Uniform => "uniform",
            Self::RoundRobin => "round_robin",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| PolicyError::UnknownVariant(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    Censored,
    Uncensored,
}

/// Feedback model a policy assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Uncensored,
    Censored { window: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("unknown policy variant `{0}`")]
    UnknownVariant(String),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("gamma must lie in [0.5, 1], got {0}")]
    InvalidGamma(f64),
    #[error("censored setting needs a window `m` (none in the policy or the instance)")]
    MissingWindow,
    #[error("censoring window must be positive")]
    ZeroWindow,
    #[error("{0} is only defined in the censored setting")]
    RequiresCensoring(&'static str),
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// Policy selection and knobs, as found in experiment configs.
///
/// `setting` and `m` default to the instance's own censoring window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub variant: Variant,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub setting: Option<SettingKind>,
    #[serde(default)]
    pub m: Option<u64>,
}

impl PolicyConfig {
    pub fn new(variant: Variant) -> Self {
        Self { variant, name: None, epsilon: DEFAULT_EPSILON, gamma: DEFAULT_GAMMA, setting: None, m: None }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn censored(mut self, window: u64) -> Self {
        self.setting = Some(SettingKind::Censored);
        self.m = Some(window);
        self
    }

    pub fn uncensored(mut self) -> Self {
        self.setting = Some(SettingKind::Uncensored);
        self.m = None;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn resolve_setting(&self, instance: &BanditInstance) -> Result<Setting, PolicyError> {
        let kind = self.setting.unwrap_or(match instance.censor_window() {
            Some(_) => SettingKind::Censored,
            None => SettingKind::Uncensored,
        });
        match kind {
            SettingKind::Uncensored => Ok(Setting::Uncensored),
            SettingKind::Censored => match self.m.or(instance.censor_window()) {
                None => Err(PolicyError::MissingWindow),
                Some(0) => Err(PolicyError::ZeroWindow),
                Some(window) => Ok(Setting::Censored { window }),
            },
        }
    }

    /// Label used in reports: the configured name, or a short default
    /// such as `d-klucb` (censored) / `ud-klucb` (uncensored).
    pub fn label(&self, instance: &BanditInstance) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let prefix = match self.resolve_setting(instance) {
            Ok(Setting::Censored { .. }) => "d",
            _ => "ud",
        };
        match self.variant {
            Variant::DelayedUcb => format!("{prefix}-ucb"),
            Variant::DelayedKlucb => format!("{prefix}-klucb"),
            Variant::DiscardingUcb => "disc-ucb".into(),
            Variant::DiscardingKlucb => "disc-klucb".into(),
            Variant::AgnosticDelayedKlucb => format!("agn-{prefix}-klucb"),
            Variant::Oracle => "oracle".into(),
            Variant::Uniform => "uniform".into(),
            Variant::RoundRobin => "round-robin".into(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(PolicyError::InvalidEpsilon(self.epsilon));
        }
        if !(0.5..=1.0).contains(&self.gamma) {
            return Err(PolicyError::InvalidGamma(self.gamma));
        }
        Ok(())
    }

    /// Instantiates the policy for one replication; `seed` only drives
    /// randomized baselines.
    pub fn build(&self, instance: &BanditInstance, seed: u64) -> Result<Box<dyn Policy>, PolicyError> {
        self.validate()?;
        let name = self.label(instance);
        let arms = instance.arms();
        Ok(match self.variant {
            Variant::Oracle => Box::new(Fixed { name, arm: instance.best_arm() }),
            Variant::RoundRobin => Box::new(RoundRobin { name, arms }),
            Variant::Uniform => {
                // stream 0 of the same seed drives the environment
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                Box::new(UniformRandom { name, arms, rng })
            }
            Variant::DelayedUcb | Variant::DelayedKlucb => {
                let family = family(self.variant);
                let setting = self.resolve_setting(instance)?;
                Box::new(IndexPolicy::delayed(name, family, instance, setting, self.epsilon))
            }
            Variant::DiscardingUcb | Variant::DiscardingKlucb => {
                let Setting::Censored { window } = self.resolve_setting(instance)? else {
                    return Err(PolicyError::RequiresCensoring("the discarding policy"));
                };
                Box::new(IndexPolicy::discarding(name, family(self.variant), instance, window, self.epsilon))
            }
            Variant::AgnosticDelayedKlucb => {
                let setting = self.resolve_setting(instance)?;
                Box::new(IndexPolicy::agnostic(name, IndexFamily::KlUcb, arms, setting, self.epsilon, self.gamma))
            }
        })
    }
}

fn family(variant: Variant) -> IndexFamily {
    match variant {
        Variant::DelayedUcb | Variant::DiscardingUcb => IndexFamily::Ucb,
        _ => IndexFamily::KlUcb,
    }
}

/// Always plays the same arm; with the best arm this is the oracle.
#[derive(Debug, Clone)]
pub struct Fixed {
    name: String,
    arm: usize,
}

impl Policy for Fixed {
    fn name(&self) -> &str {
        &self.name
    }

    fn select_arm(&mut self, _t: u64) -> usize {
        self.arm
    }

    fn update(&mut self, _arm: usize, _feedback: &FeedbackBatch) {}
}

/// Plays arm `(t - 1) mod K`.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    name: String,
    arms: usize,
}

impl RoundRobin {
    pub fn new(arms: usize) -> Self {
        Self { name: "round-robin".into(), arms }
    }
}

impl Policy for RoundRobin {
    fn name(&self) -> &str {
        &self.name
    }

    fn select_arm(&mut self, t: u64) -> usize {
        ((t - 1) % self.arms as u64) as usize
    }

    fn update(&mut self, _arm: usize, _feedback: &FeedbackBatch) {}
}

/// Uniformly random arm each round.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    name: String,
    arms: usize,
    rng: ChaCha8Rng,
}

impl Policy for UniformRandom {
    fn name(&self) -> &str {
        &self.name
    }

    fn select_arm(&mut self, _t: u64) -> usize {
        self.rng.gen_range(0..self.arms)
    }

    fn update(&mut self, _arm: usize, _feedback: &FeedbackBatch) {}
}
