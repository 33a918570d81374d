//! Delay-weighted pseudo-regret and the closed-loop replication runner.
//!
//! At horizon `T` a pull made at round `s` weighs `cdf(T - s)`, capped at
//! `cdf(m)` in the censored setting: only the conversions disclosed by `T`
//! count towards the reward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::DelayDistribution;
use crate::environment::{BanditInstance, Environment, StepError};
use crate::policies::{Policy, PolicyConfig, PolicyError};

/// Pseudo-regret of an action sequence with horizon `actions.len()`.
pub fn pseudo_regret(instance: &BanditInstance, actions: &[usize]) -> f64 {
    let gaps = instance.gaps();
    let horizon = actions.len() as u64;
    let cap = instance.censor_window().unwrap_or(u64::MAX);
    actions
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let s = i as u64 + 1;
            gaps[a] * instance.delays().cdf((horizon - s).min(cap))
        })
        .sum()
}

/// Incremental pseudo-regret, evaluable at any horizon reached so far in
/// time proportional to the window (or in constant time for uncensored
/// geometric delays).
#[derive(Debug, Clone)]
pub struct RegretAccumulator {
    gaps: Vec<f64>,
    /// `prefix[s]` is the summed gap of the first `s` pulls.
    prefix: Vec<f64>,
    mode: Mode,
}

#[derive(Debug, Clone)]
enum Mode {
    /// Weights `weights[age]`, constant beyond the last entry.
    Window {
        weights: Vec<f64>,
    },
    Geometric {
        decay: f64,
        acc: f64,
    },
}

impl RegretAccumulator {
    pub fn new(instance: &BanditInstance) -> Self {
        let delays = instance.delays();
        let mode = match (instance.censor_window(), delays) {
            (Some(m), _) => Mode::Window { weights: delays.cdf_table(m as usize + 1) },
            (None, DelayDistribution::Geometric { decay, .. }) => Mode::Geometric { decay: *decay, acc: 0.0 },
            (None, _) => {
                let support = delays.support_len().expect("tabulated delays have finite support");
                Mode::Window { weights: delays.cdf_table(support as usize + 1) }
            }
        };
        Self { gaps: instance.gaps(), prefix: vec![0.0], mode }
    }

    pub fn push(&mut self, arm: usize) {
        let gap = self.gaps[arm];
        let total = *self.prefix.last().expect("non-empty") + gap;
        self.prefix.push(total);
        if let Mode::Geometric { decay, acc } = &mut self.mode {
            *acc = *decay * (*acc + gap);
        }
    }

    pub fn rounds(&self) -> u64 {
        self.prefix.len() as u64 - 1
    }

    /// Pseudo-regret with horizon equal to the number of pushed rounds.
    pub fn value(&self) -> f64 {
        let t = self.prefix.len() - 1;
        match &self.mode {
            Mode::Geometric { acc, .. } => (self.prefix[t] - acc).max(0.0),
            Mode::Window { weights } => {
                let cap = weights.len() - 1;
                let old = t.saturating_sub(cap);
                let mut total = self.prefix[old] * weights[cap];
                // rounds old+1..=t, ages t-s
                for s in old + 1..=t {
                    let gap = self.prefix[s] - self.prefix[s - 1];
                    if gap != 0.0 {
                        total += gap * weights[t - s];
                    }
                }
                total
            }
        }
    }
}

/// Cumulative pseudo-regret and raw reward at a list of checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub policy: String,
    pub instance_id: String,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub cum_pseudo_regret: Vec<f64>,
    pub cum_reward: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("checkpoints must be increasing and within 1..={horizon}")]
    BadCheckpoints { horizon: u64 },
}

/// `stride, 2 stride, ...` up to the horizon, which is always included.
pub fn checkpoints(horizon: u64, stride: u64) -> Vec<u64> {
    let stride = stride.max(1);
    let mut out: Vec<u64> = (1..=horizon / stride).map(|i| i * stride).collect();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// A completed replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub trace: RegretTrace,
    pub actions: Vec<usize>,
}

/// Runs `policy` for the whole horizon, drawing the environment from `seed`.
pub fn simulate(
    instance: &BanditInstance,
    policy: &mut dyn Policy,
    seed: u64,
    checkpoints: &[u64],
) -> Result<Replication, TraceError> {
    let horizon = instance.horizon();
    let valid = checkpoints.windows(2).all(|w| w[0] < w[1])
        && checkpoints.first().is_some_and(|&c| c >= 1)
        && checkpoints.last().is_some_and(|&c| c <= horizon);
    if !valid {
        return Err(TraceError::BadCheckpoints { horizon });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::new(instance);
    let mut regret = RegretAccumulator::new(instance);
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut reward = 0;
    let mut cum_pseudo_regret = Vec::with_capacity(checkpoints.len());
    let mut cum_reward = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();

    for t in 1..=horizon {
        let arm = policy.select_arm(t);
        let feedback = env.step(arm, &mut rng)?;
        reward += feedback.reward();
        policy.update(arm, &feedback);
        regret.push(arm);
        actions.push(arm);
        if next.next_if_eq(&&t).is_some() {
            cum_pseudo_regret.push(regret.value());
            cum_reward.push(reward);
        }
        if next.peek().is_none() {
            break;
        }
    }

    let trace = RegretTrace {
        policy: policy.name().to_owned(),
        instance_id: instance.id().to_owned(),
        seed,
        checkpoints: checkpoints.to_vec(),
        cum_pseudo_regret,
        cum_reward,
    };
    Ok(Replication { trace, actions })
}

/// Builds the configured policy and runs one replication.
///
/// The environment uses `ChaCha8Rng::seed_from_u64(seed)`; randomized
/// policies draw from stream 1 of the same seed.
pub fn regret_trace(
    instance: &BanditInstance,
    config: &PolicyConfig,
    seed: u64,
    checkpoints: &[u64],
) -> Result<RegretTrace, TraceError> {
    let mut policy = config.build(instance, seed)?;
    Ok(simulate(instance, policy.as_mut(), seed, checkpoints)?.trace)
}
