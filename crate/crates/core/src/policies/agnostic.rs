//! Online delay estimation for the delay-agnostic policies.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("observed delay {delay} exceeds the censoring window {window}")]
pub struct DelayBeyondWindow {
    pub delay: u64,
    pub window: u64,
}

/// Stochastic-approximation estimate of the mean delay, with steps
/// `alpha_n = n^-gamma` over the observed delays.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDelayEstimator {
    estimate: f64,
    observations: u64,
    gamma: f64,
}

impl MeanDelayEstimator {
    pub const INITIAL_ESTIMATE: f64 = 1.0;

    pub fn new(gamma: f64) -> Self {
        assert!((0.5..=1.0).contains(&gamma), "gamma must lie in [0.5, 1]");
        Self { estimate: Self::INITIAL_ESTIMATE, observations: 0, gamma }
    }

    pub fn observe(&mut self, delay: u64) {
        self.observations += 1;
        let alpha = (self.observations as f64).powf(-self.gamma);
        self.estimate = (1.0 - alpha) * self.estimate + alpha * delay as f64;
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Plug-in geometric decay `mu / (1 + mu)`, kept inside (0, 1).
    pub fn decay(&self) -> f64 {
        let mu = self.estimate.max(1e-9);
        mu / (1.0 + mu)
    }
}

/// Empirical cdf of the delays observed inside a censoring window `m`.
///
/// Since every visible delay is at most `m`, the normalized counts
/// estimate `cdf(s) / cdf(m)` rather than `cdf(s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensoredCdfEstimator {
    histogram: Vec<u64>,
    observations: u64,
}

impl CensoredCdfEstimator {
    pub fn new(window: u64) -> Self {
        Self { histogram: vec![0; window as usize + 1], observations: 0 }
    }

    pub fn window(&self) -> u64 {
        self.histogram.len() as u64 - 1
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn observe(&mut self, delay: u64) -> Result<(), DelayBeyondWindow> {
        let window = self.window();
        let slot = self.histogram.get_mut(delay as usize).filter(|_| delay <= window);
        let slot = slot.ok_or(DelayBeyondWindow { delay, window })?;
        *slot += 1;
        self.observations += 1;
        Ok(())
    }

    /// Cumulative counts: entry `s` counts observations with delay at most `s`.
    pub fn cumulative_counts(&self) -> Vec<u64> {
        self.histogram
            .iter()
            .scan(0, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Normalized cumulative counts, `None` before the first observation.
    pub fn weights(&self) -> Option<Vec<f64>> {
        if self.observations == 0 {
            return None;
        }
        let n = self.observations as f64;
        Some(self.cumulative_counts().into_iter().map(|c| c as f64 / n).collect())
    }

    /// Same as [`weights`](Self::weights) but reuses `out`.
    pub fn weights_into(&self, out: &mut Vec<f64>) -> bool {
        if self.observations == 0 {
            return false;
        }
        let n = self.observations as f64;
        out.clear();
        let mut acc = 0;
        for &c in &self.histogram {
            acc += c;
            out.push(acc as f64 / n);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelayDistribution;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_observation_takes_full_weight() {
        let mut e = MeanDelayEstimator::new(1.0);
        assert_eq!(e.estimate(), 1.0);
        assert_eq!(e.decay(), 0.5);
        e.observe(10);
        assert_eq!(e.estimate(), 10.0);
    }

    #[test]
    fn constant_stream_converges_monotonically() {
        let mut e = MeanDelayEstimator::new(0.7);
        for _ in 0..1000 {
            e.observe(3);
        }
        assert_abs_diff_eq!(e.estimate(), 3.0, epsilon = 1e-12);

        let mut e = MeanDelayEstimator::new(0.6);
        let mut prev_gap = (e.estimate() - 40.0).abs();
        for _ in 0..500 {
            e.observe(40);
            let gap = (e.estimate() - 40.0).abs();
            assert!(gap <= prev_gap + 1e-12);
            prev_gap = gap;
        }
    }

    #[test]
    fn stochastic_approximation_is_consistent() {
        const RUNS: usize = 100;
        let d = DelayDistribution::geometric(50.0).unwrap();
        let finals: Vec<f64> = (0..RUNS as u64)
            .map(|run| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
                let mut e = MeanDelayEstimator::new(0.7);
                for _ in 0..100_000 {
                    e.observe(d.sample(&mut rng));
                }
                e.estimate()
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / RUNS as f64;
        let sd = (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (RUNS - 1) as f64).sqrt();
        let se = sd / (RUNS as f64).sqrt();
        assert!((mean - 50.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn censored_counts() {
        let mut e = CensoredCdfEstimator::new(3);
        assert_eq!(e.weights(), None);
        e.observe(0).unwrap();
        assert_eq!(e.weights().unwrap(), vec![1.0; 4]);

        let mut e = CensoredCdfEstimator::new(3);
        e.observe(0).unwrap();
        e.observe(2).unwrap();
        assert_eq!(e.cumulative_counts(), vec![1, 1, 2, 2]);
        assert_eq!(e.weights().unwrap(), vec![0.5, 0.5, 1.0, 1.0]);
        let mut buf = Vec::new();
        assert!(e.weights_into(&mut buf));
        assert_eq!(buf, e.weights().unwrap());

        assert_eq!(e.observe(4), Err(DelayBeyondWindow { delay: 4, window: 3 }));
        assert_eq!(e.observations(), 2);
    }

    #[test]
    fn censored_counts_are_monotone_and_end_at_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = DelayDistribution::geometric(10.0).unwrap();
        let mut e = CensoredCdfEstimator::new(15);
        for _ in 0..5_000 {
            let x = d.sample(&mut rng);
            if x <= 15 {
                e.observe(x).unwrap();
            }
        }
        let counts = e.cumulative_counts();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*counts.last().unwrap(), e.observations());
        // normalized counts estimate cdf(s) / cdf(m)
        let w = e.weights().unwrap();
        for s in [0u64, 5, 10] {
            let target = d.cdf(s) / d.cdf(15);
            assert!((w[s as usize] - target).abs() < 0.03);
        }
    }
}
