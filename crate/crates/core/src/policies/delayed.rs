//! Optimistic index policies built on delay-corrected statistics.

use super::agnostic::{CensoredCdfEstimator, MeanDelayEstimator};
use super::indices::{argmax_lowest, discarding_indices, exploration_budget, klucb_index, ucb_index};
use super::{Policy, Setting};
use crate::delay::DelayDistribution;
use crate::environment::{BanditInstance, FeedbackBatch};
use crate::estimators::ArmStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexFamily {
    Ucb,
    KlUcb,
}

/// Where the effective count of each arm comes from.
#[derive(Debug, Clone)]
pub enum CountSource {
    /// Known geometric delays, uncensored: `N - O`.
    Geometric,
    /// Known cdf table over ages `0..=capacity`; the last entry weighs every older pull.
    Windowed { weights: Vec<f64> },
    /// Uncensored, geometric plug-in with an online mean-delay estimate.
    AgnosticMean(MeanDelayEstimator),
    /// Censored, weights from the empirical cdf of the observed delays.
    AgnosticCdf { estimator: CensoredCdfEstimator, weights: Vec<f64> },
    /// Only pulls older than the window, each weighing `tau_m`.
    Settled { tau_m: f64 },
}

/// Delayed UCB / KL-UCB, their delay-agnostic variants and the discarding
/// benchmark, sharing the same bookkeeping.
#[derive(Debug, Clone)]
pub struct IndexPolicy {
    name: String,
    family: IndexFamily,
    epsilon: f64,
    /// Disclosures later than this are ignored (censored setting).
    window: Option<u64>,
    stats: ArmStats,
    source: CountSource,
    indices: Vec<f64>,
}

impl IndexPolicy {
    /// Policy with the delay distribution known.
    pub fn delayed(
        name: impl Into<String>,
        family: IndexFamily,
        instance: &BanditInstance,
        setting: Setting,
        epsilon: f64,
    ) -> Self {
        let arms = instance.arms();
        let delays = instance.delays();
        let (stats, source, window) = match (setting, delays) {
            (Setting::Uncensored, DelayDistribution::Geometric { decay, .. }) => {
                (ArmStats::new(arms).with_decay(*decay), CountSource::Geometric, None)
            }
            (Setting::Uncensored, _) => {
                let support = delays.support_len().expect("tabulated delays have finite support") as usize;
                let weights = delays.cdf_table(support + 1);
                (ArmStats::new(arms).with_window(support), CountSource::Windowed { weights }, None)
            }
            (Setting::Censored { window }, _) => {
                let weights = delays.cdf_table(window as usize + 1);
                (ArmStats::new(arms).with_window(window as usize), CountSource::Windowed { weights }, Some(window))
            }
        };
        Self::assemble(name.into(), family, epsilon, window, stats, source)
    }

    /// Benchmark that only trusts pulls whose feedback is fully resolved.
    pub fn discarding(
        name: impl Into<String>,
        family: IndexFamily,
        instance: &BanditInstance,
        window: u64,
        epsilon: f64,
    ) -> Self {
        let tau_m = instance.delays().cdf(window);
        let stats = ArmStats::new(instance.arms()).with_window(window as usize);
        Self::assemble(name.into(), family, epsilon, Some(window), stats, CountSource::Settled { tau_m })
    }

    /// Policy that learns the delay distribution from the disclosures.
    pub fn agnostic(
        name: impl Into<String>,
        family: IndexFamily,
        arms: usize,
        setting: Setting,
        epsilon: f64,
        gamma: f64,
    ) -> Self {
        let (stats, source, window) = match setting {
            Setting::Uncensored => {
                let estimator = MeanDelayEstimator::new(gamma);
                (ArmStats::new(arms).with_decay(estimator.decay()), CountSource::AgnosticMean(estimator), None)
            }
            Setting::Censored { window } => {
                let estimator = CensoredCdfEstimator::new(window);
                let source = CountSource::AgnosticCdf { estimator, weights: Vec::new() };
                (ArmStats::new(arms).with_window(window as usize), source, Some(window))
            }
        };
        Self::assemble(name.into(), family, epsilon, window, stats, source)
    }

    fn assemble(
        name: String,
        family: IndexFamily,
        epsilon: f64,
        window: Option<u64>,
        stats: ArmStats,
        source: CountSource,
    ) -> Self {
        let arms = stats.arms();
        Self { name, family, epsilon, window, stats, source, indices: vec![0.0; arms] }
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    pub fn source(&self) -> &CountSource {
        &self.source
    }

    /// Effective counts used by the next decision, `None` while the source
    /// cannot provide them (discarding warm-up, no delay observed yet).
    pub fn effective_counts(&self) -> Option<Vec<f64>> {
        let arms = self.stats.arms();
        match &self.source {
            CountSource::Geometric | CountSource::AgnosticMean(_) => {
                Some((0..arms).map(|k| self.stats.effective_count_geometric(k)).collect())
            }
            CountSource::Windowed { weights } => Some(self.stats.effective_counts_windowed(weights)),
            CountSource::AgnosticCdf { estimator, .. } => {
                estimator.weights().map(|w| self.stats.effective_counts_windowed(&w))
            }
            CountSource::Settled { tau_m } => {
                let settled: Vec<u64> = (0..arms).map(|k| self.stats.settled_pulls(k)).collect();
                settled.iter().all(|&n| n > 0).then(|| settled.iter().map(|&n| tau_m * n as f64).collect())
            }
        }
    }

    /// Index values from the last non-forced decision.
    pub fn last_indices(&self) -> &[f64] {
        &self.indices
    }

    fn round_robin(&self, t: u64) -> usize {
        ((t - 1) % self.stats.arms() as u64) as usize
    }
}

impl Policy for IndexPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select_arm(&mut self, t: u64) -> usize {
        let arms = self.stats.arms();
        if t <= arms as u64 {
            return (t - 1) as usize;
        }
        let beta = exploration_budget(self.epsilon, t);

        if let CountSource::Settled { tau_m } = self.source {
            for k in 0..arms {
                let idx = discarding_indices(self.stats.settled_successes(k), self.stats.settled_pulls(k), tau_m, beta);
                let Some(idx) = idx else {
                    return self.round_robin(t);
                };
                self.indices[k] = match self.family {
                    IndexFamily::Ucb => idx.ucb,
                    IndexFamily::KlUcb => idx.klucb,
                };
            }
            return argmax_lowest(&self.indices);
        }

        let counts = match &mut self.source {
            CountSource::AgnosticCdf { estimator, weights } => {
                if !estimator.weights_into(weights) {
                    return self.round_robin(t);
                }
                self.stats.effective_counts_windowed(weights)
            }
            CountSource::Windowed { weights } => self.stats.effective_counts_windowed(weights),
            _ => (0..arms).map(|k| self.stats.effective_count_geometric(k)).collect(),
        };
        for (k, &n_eff) in counts.iter().enumerate() {
            self.indices[k] = if n_eff > 0.0 {
                let theta_hat = self.stats.successes(k) as f64 / n_eff;
                match self.family {
                    IndexFamily::Ucb => ucb_index(theta_hat, self.stats.pulls(k) as f64, n_eff, beta),
                    IndexFamily::KlUcb => klucb_index(theta_hat, n_eff, beta),
                }
            } else {
                f64::INFINITY
            };
        }
        argmax_lowest(&self.indices)
    }

    fn update(&mut self, arm: usize, feedback: &FeedbackBatch) {
        let window = self.window;
        let visible = || feedback.disclosures.iter().filter(move |d| window.is_none_or(|m| d.delay() <= m));
        match &mut self.source {
            CountSource::AgnosticMean(estimator) => {
                for d in visible() {
                    estimator.observe(d.delay());
                }
                self.stats.set_decay(estimator.decay());
            }
            CountSource::AgnosticCdf { estimator, .. } => {
                for d in visible() {
                    estimator.observe(d.delay()).expect("filtered to the window");
                }
            }
            _ => {}
        }
        self.stats.record_pull(arm);
        for d in visible() {
            self.stats.record_disclosure(d.arm, d.pull_time);
        }
    }
}
