//! Delayed-conversion bandit environment.
//!
//! Each pull triggers a Bernoulli conversion and an independent delay. A
//! conversion is queued for disclosure `delay` rounds after its pull; in the
//! censored setting conversions whose delay exceeds the window are dropped
//! when they are generated. Non-conversions are never materialized.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{DelayDistribution, DelayError, DelaySpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("an instance needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("conversion rate of arm {arm} is {value}, outside [0, 1]")]
    RateOutOfRange { arm: usize, value: f64 },
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("censoring window must be positive")]
    ZeroWindow,
    #[error(transparent)]
    Delay(#[from] DelayError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("cannot step past the horizon {0}")]
    PastHorizon(u64),
    #[error("arm {arm} does not exist (instance has {arms} arms)")]
    InvalidArm { arm: usize, arms: usize },
}

/// JSON form of a [`BanditInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub theta: Vec<f64>,
    pub delay: DelaySpec,
    #[serde(default)]
    pub censor_window: Option<u64>,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    id: String,
    theta: Vec<f64>,
    delays: DelayDistribution,
    censor_window: Option<u64>,
    horizon: u64,
}

impl BanditInstance {
    pub fn new(
        theta: Vec<f64>,
        delays: DelayDistribution,
        censor_window: Option<u64>,
        horizon: u64,
    ) -> Result<Self, InstanceError> {
        if theta.len() < 2 {
            return Err(InstanceError::TooFewArms(theta.len()));
        }
        if let Some((arm, &value)) = theta.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(InstanceError::RateOutOfRange { arm, value });
        }
        if horizon == 0 {
            return Err(InstanceError::ZeroHorizon);
        }
        if censor_window == Some(0) {
            return Err(InstanceError::ZeroWindow);
        }
        Ok(Self { id: "instance".into(), theta, delays, censor_window, horizon })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same rates and delays under another censoring window.
    pub fn with_censor_window(&self, censor_window: Option<u64>) -> Result<Self, InstanceError> {
        if censor_window == Some(0) {
            return Err(InstanceError::ZeroWindow);
        }
        Ok(Self { censor_window, ..self.clone() })
    }

    pub fn from_spec(spec: &InstanceSpec) -> Result<Self, InstanceError> {
        let delays = DelayDistribution::from_spec(&spec.delay)?;
        let inst = Self::new(spec.theta.clone(), delays, spec.censor_window, spec.horizon)?;
        Ok(match &spec.id {
            Some(id) => inst.with_id(id.clone()),
            None => inst,
        })
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            id: Some(self.id.clone()),
            theta: self.theta.clone(),
            delay: self.delays.to_spec(),
            censor_window: self.censor_window,
            horizon: self.horizon,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arms(&self) -> usize {
        self.theta.len()
    }

    pub fn delays(&self) -> &DelayDistribution {
        &self.delays
    }

    pub fn censor_window(&self) -> Option<u64> {
        self.censor_window
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn best_rate(&self) -> f64 {
        self.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index arm achieving the best rate.
    pub fn best_arm(&self) -> usize {
        let best = self.best_rate();
        self.theta.iter().position(|&v| v == best).expect("non-empty")
    }

    /// `theta* - theta_k` for every arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_rate();
        self.theta.iter().map(|v| best - v).collect()
    }
}

/// A conversion revealed to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disclosure {
    pub pull_time: u64,
    pub arm: usize,
    /// Round at which it was revealed.
    pub round: u64,
}

impl Disclosure {
    pub fn delay(&self) -> u64 {
        self.round - self.pull_time
    }
}

/// Everything revealed at the end of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackBatch {
    pub round: u64,
    pub disclosures: Vec<Disclosure>,
}

impl FeedbackBatch {
    /// Number of conversions observed this round.
    pub fn reward(&self) -> u64 {
        self.disclosures.len() as u64
    }
}

/// `(due_time, pull_time, arm)`, ordered so the heap pops the earliest due.
type Pending = Reverse<(u64, u64, usize)>;

/// Pending conversions scheduled for disclosure.
#[derive(Debug, Clone, Default)]
pub struct DisclosureQueue {
    heap: BinaryHeap<Pending>,
}

impl DisclosureQueue {
    pub fn push(&mut self, pull_time: u64, arm: usize, due: u64) {
        self.heap.push(Reverse((due, pull_time, arm)));
    }

    /// Removes and returns every entry due at or before `round`, in
    /// `(due, pull_time)` order.
    pub fn drain_due(&mut self, round: u64) -> Vec<Disclosure> {
        let mut out = Vec::new();
        while let Some(&Reverse((due, pull_time, arm))) = self.heap.peek() {
            if due > round {
                break;
            }
            self.heap.pop();
            out.push(Disclosure { pull_time, arm, round });
        }
        out
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Mutable state of one replication.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    instance: &'a BanditInstance,
    next_round: u64,
    queue: DisclosureQueue,
    enqueued: u64,
}

impl<'a> Environment<'a> {
    pub fn new(instance: &'a BanditInstance) -> Self {
        Self { instance, next_round: 1, queue: DisclosureQueue::default(), enqueued: 0 }
    }

    pub fn instance(&self) -> &BanditInstance {
        self.instance
    }

    /// The round the next call to [`step`](Self::step) plays.
    pub fn round(&self) -> u64 {
        self.next_round
    }

    /// Conversions scheduled so far with a due time inside the horizon.
    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Plays `arm` in the current round and returns the conversions revealed
    /// in that round, including a zero-delay conversion of this very pull.
    pub fn step<R: Rng + ?Sized>(&mut self, arm: usize, rng: &mut R) -> Result<FeedbackBatch, StepError> {
        let t = self.next_round;
        let horizon = self.instance.horizon;
        if t > horizon {
            return Err(StepError::PastHorizon(horizon));
        }
        let arms = self.instance.arms();
        if arm >= arms {
            return Err(StepError::InvalidArm { arm, arms });
        }

        let converted = rng.gen::<f64>() < self.instance.theta[arm];
        let delay = self.instance.delays.sample(rng);
        let visible = self.instance.censor_window.is_none_or(|m| delay <= m);
        let due = t.saturating_add(delay);
        // Conversions due after the horizon can never be observed.
        if converted && visible && due <= horizon {
            self.queue.push(t, arm, due);
            self.enqueued += 1;
        }

        self.next_round += 1;
        Ok(FeedbackBatch { round: t, disclosures: self.queue.drain_due(t) })
    }
}
