//! Asymptotic regret constants (coefficients of `ln T`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{bernoulli_kl, DivergenceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("need at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("conversion rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("best rate {rate} is shared by arms {first} and {second}")]
    NonUniqueBest { rate: f64, first: usize, second: usize },
    #[error("tau_m must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSetting {
    Censored,
    Uncensored,
}

/// Leading constants of the delayed UCB and KL-UCB upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperConstants {
    pub epsilon: f64,
    pub eta: f64,
    /// `(1 + eps) sum 1 / (2 tau_m gap_k)`.
    pub ucb: f64,
    pub ucb_contributions: Vec<f64>,
    /// `(1 + eta)(1 + eps) / (1 - tau_m theta_1) * sum tau_m gap_k / d(tau_m theta_k, tau_m theta_1)`.
    pub klucb: f64,
    pub klucb_contributions: Vec<f64>,
    /// Same with the prefactor `1 / (1 - theta_1)`.
    pub klucb_unscaled_prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub setting: BoundSetting,
    pub tau_m: f64,
    pub best_arm: usize,
    /// Lower-bound constant.
    pub lower_bound: f64,
    /// Per-arm terms of the lower bound, zero for the best arm.
    pub contributions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<UpperConstants>,
}

fn unique_best(theta: &[f64]) -> Result<usize, BoundError> {
    if theta.len() < 2 {
        return Err(BoundError::TooFewArms(theta.len()));
    }
    if let Some(&v) = theta.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(BoundError::RateOutOfRange(v));
    }
    let best = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut at = theta.iter().enumerate().filter(|(_, &v)| v == best).map(|(k, _)| k);
    let first = at.next().expect("non-empty");
    match at.next() {
        Some(second) => Err(BoundError::NonUniqueBest { rate: best, first, second }),
        None => Ok(first),
    }
}

fn check_tau(tau_m: f64) -> Result<(), BoundError> {
    if tau_m > 0.0 && tau_m <= 1.0 {
        Ok(())
    } else {
        Err(BoundError::InvalidTau(tau_m))
    }
}

/// `tau gap / d(tau theta_k, tau theta*)`; an infinite divergence gives 0.
fn lower_term(theta_k: f64, best: f64, tau: f64) -> f64 {
    match bernoulli_kl(tau * theta_k, tau * best) {
        Ok(d) => tau * (best - theta_k) / d,
        Err(DivergenceError::Infinite { .. }) => 0.0,
        Err(e) => unreachable!("rates were validated: {e}"),
    }
}

/// Lower bound when only conversions within the window are observed,
/// `sum_k tau_m gap_k / d(tau_m theta_k, tau_m theta*)`.
pub fn lower_bound_censored(theta: &[f64], tau_m: f64) -> Result<BoundReport, BoundError> {
    check_tau(tau_m)?;
    let best_arm = unique_best(theta)?;
    let best = theta[best_arm];
    let contributions: Vec<f64> =
        theta.iter().enumerate().map(|(k, &v)| if k == best_arm { 0.0 } else { lower_term(v, best, tau_m) }).collect();
    Ok(BoundReport {
        setting: BoundSetting::Censored,
        tau_m,
        best_arm,
        lower_bound: contributions.iter().sum(),
        contributions,
        upper: None,
    })
}

/// Classical lower bound `sum_k gap_k / d(theta_k, theta*)`.
pub fn lower_bound_uncensored(theta: &[f64]) -> Result<BoundReport, BoundError> {
    let mut report = lower_bound_censored(theta, 1.0)?;
    report.setting = BoundSetting::Uncensored;
    Ok(report)
}

/// Lower bound together with both upper-bound constants. `tau_m = 1` is
/// the uncensored case.
pub fn upper_bound_constants(theta: &[f64], tau_m: f64, epsilon: f64, eta: f64) -> Result<BoundReport, BoundError> {
    if !(epsilon > 0.0) {
        return Err(BoundError::NonPositive { name: "epsilon", value: epsilon });
    }
    if !(eta > 0.0) {
        return Err(BoundError::NonPositive { name: "eta", value: eta });
    }
    let mut report = lower_bound_censored(theta, tau_m)?;
    if tau_m == 1.0 {
        report.setting = BoundSetting::Uncensored;
    }
    let best_arm = report.best_arm;
    let best = theta[best_arm];

    let ucb_contributions: Vec<f64> = theta
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == best_arm { 0.0 } else { (1.0 + epsilon) / (2.0 * tau_m * (best - v)) })
        .collect();
    let inflation = (1.0 + eta) * (1.0 + epsilon);
    let scaled = inflation / (1.0 - tau_m * best);
    let klucb_contributions: Vec<f64> = report.contributions.iter().map(|c| scaled * c).collect();
    let sum: f64 = report.contributions.iter().sum();

    report.upper = Some(UpperConstants {
        epsilon,
        eta,
        ucb: ucb_contributions.iter().sum(),
        ucb_contributions,
        klucb: klucb_contributions.iter().sum(),
        klucb_contributions,
        klucb_unscaled_prefactor: inflation / (1.0 - best) * sum,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const THETA_L: [f64; 3] = [0.1, 0.05, 0.03];
    // cdf(1000) of geometric delays with mean 500
    const TAU_M: f64 = 0.864_664_806_806_756_7;

    #[test]
    fn reference_values() {
        // high-precision evaluations of the closed forms
        assert_abs_diff_eq!(
            lower_bound_uncensored(&THETA_L).unwrap().lower_bound,
            4.908_813_424_020_003,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            lower_bound_censored(&THETA_L, TAU_M).unwrap().lower_bound,
            4.965_286_079_881_382,
            epsilon = 1e-10
        );
        let r = lower_bound_uncensored(&[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(r.lower_bound, 0.455_119_613_313_418_7, epsilon = 1e-12);
        assert_eq!(r.contributions[0], 0.0);
        let u = upper_bound_constants(&[0.99, 0.01], 1.0, 0.1, 0.1).unwrap().upper.unwrap();
        assert_abs_diff_eq!(u.ucb, 0.561_224_489_795_918_4, epsilon = 1e-14);
    }

    #[test]
    fn censored_at_full_window_is_uncensored() {
        let a = lower_bound_censored(&THETA_L, 1.0).unwrap();
        let b = lower_bound_uncensored(&THETA_L).unwrap();
        assert_eq!(a.lower_bound, b.lower_bound);
        assert_eq!(a.contributions, b.contributions);
    }

    #[test]
    fn close_arms_are_harder() {
        let mut prev = 0.0;
        for delta in [0.2, 0.1, 0.05, 0.02, 0.01, 0.005] {
            let lb = lower_bound_uncensored(&[0.5, 0.5 - delta]).unwrap().lower_bound;
            let lbc = lower_bound_censored(&[0.5, 0.5 - delta], 0.5).unwrap().lower_bound;
            assert!(lb > prev);
            assert!(lbc > lb);
            prev = lb;
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            lower_bound_uncensored(&[0.2, 0.2, 0.1]),
            Err(BoundError::NonUniqueBest { first: 0, second: 1, .. })
        ));
        assert!(matches!(lower_bound_censored(&THETA_L, 0.0), Err(BoundError::InvalidTau(_))));
        assert!(matches!(lower_bound_uncensored(&[0.2]), Err(BoundError::TooFewArms(1))));
        assert!(matches!(upper_bound_constants(&THETA_L, 1.0, 0.0, 0.1), Err(BoundError::NonPositive { .. })));
        // an arm that never converts against a sure one: infinite divergence
        let r = lower_bound_uncensored(&[1.0, 0.0]).unwrap();
        assert_eq!(r.lower_bound, 0.0);
    }

    #[test]
    fn klucb_constant_is_below_ucb_at_low_rates() {
        let u = upper_bound_constants(&THETA_L, TAU_M, 0.1, 0.1).unwrap();
        let up = u.upper.as_ref().unwrap();
        assert!(up.klucb.is_finite() && up.klucb > 0.0);
        assert!(up.klucb < up.ucb);
        assert!(up.klucb_unscaled_prefactor > up.klucb);
        let json = serde_json::to_value(&u).unwrap();
        assert_eq!(json["setting"], "censored");
    }

    proptest! {
        #[test]
        fn klucb_constant_dominates_lower_bound(
            mut theta in prop::collection::vec(0.001..0.999f64, 2..6),
            tau in 0.05..=1.0f64,
        ) {
            theta.dedup();
            prop_assume!(unique_best(&theta).is_ok());
            let r = upper_bound_constants(&theta, tau, 0.1, 0.1).unwrap();
            let up = r.upper.as_ref().unwrap();
            for (u, l) in up.klucb_contributions.iter().zip(&r.contributions) {
                prop_assert!(u >= l);
                prop_assert!(*l >= 0.0);
            }
            prop_assert!(up.klucb >= r.lower_bound);
        }
    }
}
