//! Optimistic indices.

use crate::divergence::klucb_invert;

/// Exploration budget `(1 + epsilon) ln t`.
pub fn exploration_budget(epsilon: f64, t: u64) -> f64 {
    (1.0 + epsilon) * (t as f64).ln()
}

/// Delay-corrected UCB: `theta_hat + sqrt(n / n_eff) * sqrt(beta / (2 n_eff))`.
///
/// With `n_eff == n` this is the classical index.
pub fn ucb_index(theta_hat: f64, n: f64, n_eff: f64, beta: f64) -> f64 {
    debug_assert!(n_eff > 0.0);
    theta_hat + (n / n_eff).sqrt() * (beta / (2.0 * n_eff)).sqrt()
}

/// Delay-corrected KL-UCB index on the Poisson divergence.
///
/// Estimates at or above one (possible while the effective count lags the
/// pull count) map straight to the optimistic value 1.
pub fn klucb_index(theta_hat: f64, n_eff: f64, beta: f64) -> f64 {
    if theta_hat >= 1.0 {
        return 1.0;
    }
    klucb_invert(theta_hat, n_eff, beta).unwrap_or(f64::INFINITY)
}

/// Indices of the discarding benchmark, built only from pulls whose
/// feedback is fully resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscardingIndices {
    pub estimate: f64,
    pub ucb: f64,
    pub klucb: f64,
}

/// `None` while no resolved pull exists.
pub fn discarding_indices(
    settled_successes: u64,
    settled_pulls: u64,
    tau_m: f64,
    beta: f64,
) -> Option<DiscardingIndices> {
    if settled_pulls == 0 {
        return None;
    }
    let n_eff = tau_m * settled_pulls as f64;
    let estimate = settled_successes as f64 / n_eff;
    Some(DiscardingIndices {
        estimate,
        ucb: estimate + (beta / (2.0 * n_eff)).sqrt(),
        klucb: klucb_index(estimate, n_eff, beta),
    })
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ucb_examples() {
        assert_abs_diff_eq!(ucb_index(0.3, 50.0, 50.0, 2.0), 0.3 + (2.0f64 / 100.0).sqrt());
        assert_eq!(ucb_index(0.3, 50.0, 20.0, 0.0), 0.3);
        // 0.2 + sqrt(1.25) sqrt(4.6 / 160)
        assert_abs_diff_eq!(ucb_index(0.2, 100.0, 80.0, 4.6), 0.389_571_886_101_288_8, epsilon = 1e-12);
    }

    #[test]
    fn klucb_examples() {
        assert_eq!(klucb_index(1.2, 3.0, 2.0), 1.0);
        assert_abs_diff_eq!(klucb_index(0.0, 100.0, 4.6), 0.046, epsilon = 1e-12);
        assert_eq!(klucb_index(0.3, 10.0, 0.0), 0.3);
    }

    #[test]
    fn discarding_examples() {
        let idx = discarding_indices(0, 10, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(idx.ucb, 0.2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(idx.klucb, 2.0 / (0.5 * 10.0), epsilon = 1e-12);

        let idx = discarding_indices(3, 10, 0.5, 0.0).unwrap();
        assert_eq!(idx.ucb, idx.estimate);
        assert_eq!(idx.klucb, idx.estimate);
        assert_eq!(discarding_indices(0, 0, 0.5, 1.0), None);
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax_lowest(&[0.2, 0.2, 0.2]), 0);
        assert_eq!(argmax_lowest(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax_lowest(&[0.9, f64::INFINITY, f64::INFINITY]), 1);
    }

    #[test]
    fn budget_value() {
        assert_eq!(exploration_budget(0.1, 1), 0.0);
        assert_abs_diff_eq!(exploration_budget(0.1, 100), 1.1 * 100f64.ln());
    }

    proptest! {
        #[test]
        fn indices_monotone(s in 0u64..50, n in 1u64..500, frac in 0.05..1.0f64, b1 in 0.0..15.0f64, b2 in 0.0..15.0f64, shrink in 0.1..1.0f64) {
            let n_eff = frac * n as f64;
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let theta = s as f64 / n_eff;
            prop_assert!(ucb_index(theta, n as f64, n_eff, lo) <= ucb_index(theta, n as f64, n_eff, hi));
            prop_assert!(klucb_index(theta, n_eff, lo) <= klucb_index(theta, n_eff, hi));

            // more effective pulls at the same successes and pulls
            let smaller = n_eff * shrink;
            let theta_small = s as f64 / smaller;
            prop_assert!(ucb_index(theta, n as f64, n_eff, lo) <= ucb_index(theta_small, n as f64, smaller, lo) + 1e-12);
            prop_assert!(klucb_index(theta, n_eff, lo) <= klucb_index(theta_small, smaller, lo) + 1e-12);

            if theta <= 1.0 {
                prop_assert!(ucb_index(theta, n as f64, n_eff, lo) >= theta);
                prop_assert!(klucb_index(theta, n_eff, lo) >= theta);
            }
        }

        #[test]
        fn scaled_statistics_keep_klucb_ordering(
            stats in prop::collection::vec((0u64..40, 20.0..400.0f64), 2..5),
            tau in 0.05..1.0f64,
            beta in 0.5..12.0f64,
        ) {
            // Statistics that estimate tau * theta with effective count n / tau
            // (the biased plug-in of the censored agnostic policy) yield
            // exactly tau times the plain index.
            let plain: Vec<f64> = stats.iter().map(|&(s, n)| klucb_index(s as f64 / n, n, beta)).collect();
            let scaled: Vec<f64> = stats
                .iter()
                .map(|&(s, n)| {
                    let theta = tau * s as f64 / n;
                    klucb_invert(theta, n / tau, beta).unwrap()
                })
                .collect();
            let unclamped = plain.iter().all(|&u| u < 1.0);
            let distinct = plain.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-6);
            if unclamped && distinct {
                prop_assert_eq!(argmax_lowest(&plain), argmax_lowest(&scaled));
                for (p, s) in plain.iter().zip(&scaled) {
                    prop_assert!((tau * p - s).abs() < 1e-9);
                }
            }
        }
    }
}
