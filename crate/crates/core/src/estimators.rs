//! Per-arm statistics and the delay-corrected effective pull count.
//!
//! Timing convention: when choosing the action of round `t`, the learner has
//! seen pulls and disclosures of rounds `1..t`. A pull made at round `s` has
//! then had disclosure opportunities at rounds `s..t`, so it carries weight
//! `cdf(t - 1 - s)`; in the censored setting the weight is capped at
//! `cdf(m)`. The effective count of an arm is the sum of those weights.
//!
//! Two incremental paths are maintained next to the plain counts:
//!
//! * a geometric decay accumulator `O_k` with `N_k - O_k` equal to the
//!   effective count for geometric delays, updated as `O <- decay * (O + pulled)`;
//! * a recency window holding the arm ids of the last `m` rounds. Pulls that
//!   leave the window are folded into per-arm "settled" counts, whose weight
//!   no longer changes.

use std::collections::VecDeque;

use crate::delay::DelayDistribution;

/// Reference effective count: `sum_s cdf(now - 1 - s)` over pull rounds `s < now`.
pub fn effective_count_uncensored(pull_times: &[u64], now: u64, delays: &DelayDistribution) -> f64 {
    pull_times
        .iter()
        .map(|&s| {
            debug_assert!(s < now, "pull at {s} is not visible at decision time {now}");
            delays.cdf(now - 1 - s)
        })
        .sum()
}

/// Reference effective count with every weight capped at `cdf(window)`.
pub fn effective_count_capped(pull_times: &[u64], now: u64, delays: &DelayDistribution, window: u64) -> f64 {
    pull_times.iter().map(|&s| delays.cdf((now - 1 - s).min(window))).sum()
}

/// One step of the geometric accumulator.
pub fn geometric_update(acc: f64, pulled: bool, decay: f64) -> f64 {
    decay * (acc + if pulled { 1.0 } else { 0.0 })
}

/// `S / Ñ`, or `None` while the effective count is zero. May exceed one.
pub fn conversion_rate_estimate(successes: u64, n_eff: f64) -> Option<f64> {
    (n_eff > 0.0).then(|| successes as f64 / n_eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    arm: usize,
    converted: bool,
}

#[derive(Debug, Clone)]
struct RecencyWindow {
    capacity: usize,
    slots: VecDeque<Slot>,
    settled_pulls: Vec<u64>,
    settled_successes: Vec<u64>,
}

impl RecencyWindow {
    fn new(arms: usize, capacity: usize) -> Self {
        Self {
            capacity,
            slots: VecDeque::with_capacity(capacity + 1),
            settled_pulls: vec![0; arms],
            settled_successes: vec![0; arms],
        }
    }

    fn push(&mut self, arm: usize) {
        self.slots.push_back(Slot { arm, converted: false });
        if self.slots.len() > self.capacity {
            let old = self.slots.pop_front().expect("non-empty");
            self.settled_pulls[old.arm] += 1;
            self.settled_successes[old.arm] += u64::from(old.converted);
        }
    }
}

/// Running statistics of every arm for one replication.
#[derive(Debug, Clone)]
pub struct ArmStats {
    rounds: u64,
    successes: Vec<u64>,
    pulls: Vec<u64>,
    decay: Option<f64>,
    decay_acc: Vec<f64>,
    window: Option<RecencyWindow>,
}

impl ArmStats {
    /// Plain counts only.
    pub fn new(arms: usize) -> Self {
        Self {
            rounds: 0,
            successes: vec![0; arms],
            pulls: vec![0; arms],
            decay: None,
            decay_acc: vec![0.0; arms],
            window: None,
        }
    }

    /// Enables the geometric accumulator with the given per-step decay.
    pub fn with_decay(mut self, decay: f64) -> Self {
        assert!(decay > 0.0 && decay < 1.0, "decay must lie in (0, 1)");
        self.decay = Some(decay);
        self
    }

    /// Enables a recency window over the last `capacity` rounds.
    pub fn with_window(mut self, capacity: usize) -> Self {
        self.window = Some(RecencyWindow::new(self.arms(), capacity));
        self
    }

    pub fn arms(&self) -> usize {
        self.pulls.len()
    }

    /// Number of pulls recorded so far (the last completed round).
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.pulls[arm]
    }

    pub fn successes(&self, arm: usize) -> u64 {
        self.successes[arm]
    }

    pub fn decay_accumulator(&self, arm: usize) -> f64 {
        self.decay_acc[arm]
    }

    /// Replaces the decay used by future accumulator updates.
    pub fn set_decay(&mut self, decay: f64) {
        assert!(decay > 0.0 && decay < 1.0, "decay must lie in (0, 1)");
        self.decay = Some(decay);
    }

    pub fn window_capacity(&self) -> Option<usize> {
        self.window.as_ref().map(|w| w.capacity)
    }

    /// Records the pull of the next round.
    pub fn record_pull(&mut self, arm: usize) {
        self.rounds += 1;
        self.pulls[arm] += 1;
        if let Some(decay) = self.decay {
            for (k, acc) in self.decay_acc.iter_mut().enumerate() {
                *acc = geometric_update(*acc, k == arm, decay);
            }
        }
        if let Some(w) = &mut self.window {
            w.push(arm);
        }
    }

    /// Credits a disclosed conversion to the pull made at `pull_time`.
    pub fn record_disclosure(&mut self, arm: usize, pull_time: u64) {
        debug_assert!(pull_time >= 1 && pull_time <= self.rounds);
        self.successes[arm] += 1;
        if let Some(w) = &mut self.window {
            let first = self.rounds + 1 - w.slots.len() as u64;
            if pull_time >= first {
                let slot = &mut w.slots[(pull_time - first) as usize];
                debug_assert_eq!(slot.arm, arm);
                slot.converted = true;
            } else {
                w.settled_successes[arm] += 1;
            }
        }
    }

    /// `N_k - O_k`; requires the geometric accumulator.
    pub fn effective_count_geometric(&self, arm: usize) -> f64 {
        assert!(self.decay.is_some(), "geometric accumulator is disabled");
        (self.pulls[arm] as f64 - self.decay_acc[arm]).max(0.0)
    }

    /// Effective counts of all arms from the recency window, where
    /// `weights[a]` is the weight of a pull `a` rounds old and
    /// `weights[capacity]` the weight of settled pulls.
    pub fn effective_counts_windowed(&self, weights: &[f64]) -> Vec<f64> {
        let w = self.window.as_ref().expect("recency window is disabled");
        assert!(weights.len() > w.capacity, "need a weight for every age up to the window");
        let settled_weight = weights[w.capacity];
        let mut counts: Vec<f64> = w.settled_pulls.iter().map(|&n| n as f64 * settled_weight).collect();
        for (age, slot) in w.slots.iter().rev().enumerate() {
            counts[slot.arm] += weights[age];
        }
        counts
    }

    /// Censored effective count of one arm, evaluating the cdf directly.
    pub fn effective_count_censored(&self, arm: usize, delays: &DelayDistribution) -> f64 {
        let w = self.window.as_ref().expect("recency window is disabled");
        let recent: f64 =
            w.slots.iter().rev().enumerate().filter(|(_, s)| s.arm == arm).map(|(age, _)| delays.cdf(age as u64)).sum();
        w.settled_pulls[arm] as f64 * delays.cdf(w.capacity as u64) + recent
    }

    /// Pulls of `arm` that have left the recency window.
    pub fn settled_pulls(&self, arm: usize) -> u64 {
        self.window.as_ref().map_or(0, |w| w.settled_pulls[arm])
    }

    /// Disclosed conversions of pulls that have left the recency window.
    pub fn settled_successes(&self, arm: usize) -> u64 {
        self.window.as_ref().map_or(0, |w| w.settled_successes[arm])
    }

    /// Pulls of `arm` still inside the recency window.
    pub fn recent_pulls(&self, arm: usize) -> u64 {
        self.window.as_ref().map_or(0, |w| w.slots.iter().filter(|s| s.arm == arm).count() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pull_and_disclosure_bookkeeping() {
        let mut s = ArmStats::new(3).with_window(2);
        s.record_pull(1);
        assert_eq!((s.pulls(1), s.successes(1)), (1, 0));
        s.record_pull(1);
        s.record_pull(1);
        assert_eq!(s.pulls(1), 3);
        assert_eq!(s.settled_pulls(1), 1);
        assert_eq!(s.recent_pulls(1), 2);
        s.record_disclosure(1, 1);
        s.record_disclosure(1, 3);
        assert_eq!(s.successes(1), 2);
        assert_eq!(s.settled_successes(1), 1);
        assert!(s.successes(1) <= s.pulls(1));
    }

    #[test]
    fn disclosure_of_the_just_settled_pull() {
        // A conversion disclosed exactly `m` rounds after its pull arrives
        // after that pull has left the window.
        let mut s = ArmStats::new(2).with_window(3);
        for arm in [0, 1, 1, 0] {
            s.record_pull(arm);
        }
        s.record_disclosure(0, 1);
        assert_eq!(s.settled_successes(0), 1);
        s.record_pull(1);
        assert_eq!(s.settled_successes(1), 0);
        assert_eq!(s.settled_pulls(1), 1);
    }

    #[test]
    fn reference_counts() {
        let g = DelayDistribution::geometric(1.0).unwrap();
        assert_eq!(effective_count_uncensored(&[], 10, &g), 0.0);
        assert_abs_diff_eq!(effective_count_uncensored(&[9], 10, &g), g.cdf(0));
        assert_abs_diff_eq!(effective_count_uncensored(&[9, 8], 10, &g), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn censored_counts() {
        let g = DelayDistribution::geometric(1.0).unwrap();
        let mut s = ArmStats::new(2).with_window(3);
        assert_eq!(s.effective_count_censored(0, &g), 0.0);
        s.record_pull(0);
        assert_abs_diff_eq!(s.effective_count_censored(0, &g), 0.5, epsilon = 1e-15);

        let mut s = ArmStats::new(2).with_window(3);
        for _ in 0..5 {
            s.record_pull(0);
        }
        for _ in 0..3 {
            s.record_pull(1);
        }
        assert_abs_diff_eq!(s.effective_count_censored(0, &g), 5.0 * g.cdf(3), epsilon = 1e-14);
    }

    #[test]
    fn geometric_accumulator_steps() {
        assert_eq!(geometric_update(0.0, true, 0.5), 0.5);
        assert_eq!(geometric_update(0.8, false, 0.5), 0.4);
        let mut s = ArmStats::new(2).with_decay(0.5);
        s.record_pull(0);
        assert_abs_diff_eq!(s.effective_count_geometric(0), 0.5);
        assert_eq!(s.effective_count_geometric(1), 0.0);
    }

    #[test]
    fn estimate_values() {
        assert_eq!(conversion_rate_estimate(0, 5.0), Some(0.0));
        assert_eq!(conversion_rate_estimate(3, 10.0), Some(0.3));
        assert_abs_diff_eq!(conversion_rate_estimate(2, 1.5).unwrap(), 4.0 / 3.0);
        assert_eq!(conversion_rate_estimate(0, 0.0), None);
        assert_eq!(conversion_rate_estimate(2, 0.0), None);
    }

    #[test]
    fn incremental_paths_match_reference_on_random_sequence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let g = DelayDistribution::geometric(0.9 / 0.1).unwrap();
        let decay = g.decay().unwrap();
        let m = 25;
        let mut s = ArmStats::new(3).with_decay(decay).with_window(m);
        let weights = g.cdf_table(m + 1);
        let mut history: Vec<Vec<u64>> = vec![Vec::new(); 3];
        for t in 1..=1000u64 {
            let arm = rng.gen_range(0..3);
            s.record_pull(arm);
            history[arm].push(t);
            let windowed = s.effective_counts_windowed(&weights);
            for k in 0..3 {
                let reference = effective_count_uncensored(&history[k], t + 1, &g);
                assert!((s.effective_count_geometric(k) - reference).abs() < 1e-9);
                let capped = effective_count_capped(&history[k], t + 1, &g, m as u64);
                assert!((windowed[k] - capped).abs() < 1e-9);
                assert!((s.effective_count_censored(k, &g) - capped).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn window_and_count_invariants(seq in prop::collection::vec(0usize..4, 1..300), m in 1usize..40) {
            let g = DelayDistribution::geometric(7.0).unwrap();
            let weights = g.cdf_table(m + 1);
            let mut s = ArmStats::new(4).with_decay(g.decay().unwrap()).with_window(m);
            let mut prev = vec![0.0; 4];
            for &arm in &seq {
                s.record_pull(arm);
                let counts = s.effective_counts_windowed(&weights);
                for k in 0..4 {
                    prop_assert_eq!(s.settled_pulls(k) + s.recent_pulls(k), s.pulls(k));
                    let geo = s.effective_count_geometric(k);
                    prop_assert!(geo >= 0.0 && geo <= s.pulls(k) as f64 + 1e-12);
                    prop_assert!(counts[k] <= s.pulls(k) as f64 + 1e-12);
                    prop_assert!(counts[k] + 1e-12 >= s.settled_pulls(k) as f64 * weights[m]);
                    // weights only grow for arms that were not pulled
                    if k != arm {
                        prop_assert!(counts[k] + 1e-12 >= prev[k]);
                    }
                }
                prev = counts;
            }
        }
    }
}
