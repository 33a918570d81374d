//! Bandits with delayed, possibly censored, conversion feedback.
//!
//! The crate simulates conversions that are revealed after a random delay,
//! runs delay-corrected UCB and KL-UCB policies against them, accounts for
//! delay-weighted pseudo-regret and evaluates asymptotic regret constants.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod delay;
pub mod divergence;
pub mod environment;
pub mod estimators;
pub mod harness;
pub mod policies;
pub mod regret;

pub use bounds::{lower_bound_censored, lower_bound_uncensored, upper_bound_constants, BoundReport};
pub use delay::{DelayDistribution, DelaySpec};
pub use environment::{BanditInstance, Environment, FeedbackBatch, InstanceSpec};
pub use estimators::ArmStats;
pub use policies::{Policy, PolicyConfig, Variant};
pub use regret::{pseudo_regret, regret_trace, RegretTrace};
