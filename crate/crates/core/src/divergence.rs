//! Bernoulli and Poisson Kullback-Leibler divergences, and the KL-UCB
//! index inversion built on the Poisson divergence.
//!
//! All values are in nats. The convention `0 * ln 0 = 0` is applied
//! everywhere; a Bernoulli divergence towards a degenerate `q` is reported
//! as [`DivergenceError::Infinite`] instead of `f64::INFINITY`.

use thiserror::Error;

/// Hard cap on bisection steps in [`klucb_invert`].
pub const MAX_BISECTION_STEPS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DivergenceError {
    #[error("divergence is infinite: d({p}, {q})")]
    Infinite { p: f64, q: f64 },
    #[error("argument outside the divergence domain: {0}")]
    Domain(&'static str),
}

/// `x * ln(x / y)` with `0 * ln(0 / y) = 0`, evaluated through `ln_1p` so
/// that nearby arguments do not lose precision.
fn xlog_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ((x - y) / y).ln_1p()
    }
}

/// Bernoulli divergence `d(p, q) = p ln(p/q) + (1-p) ln((1-p)/(1-q))`.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64, DivergenceError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DivergenceError::Domain("p must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(DivergenceError::Domain("q must lie in [0, 1]"));
    }
    if p == q {
        return Ok(0.0);
    }
    if q == 0.0 || q == 1.0 {
        return Err(DivergenceError::Infinite { p, q });
    }
    let d = xlog_ratio(p, q) + xlog_ratio(1.0 - p, 1.0 - q);
    Ok(d.max(0.0))
}

/// Poisson divergence `d_Pois(p, q) = p ln(p/q) + q - p`; `d_Pois(0, q) = q`.
pub fn poisson_kl(p: f64, q: f64) -> Result<f64, DivergenceError> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(DivergenceError::Domain("p must be finite and nonnegative"));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(DivergenceError::Domain("q must be finite and positive"));
    }
    if p == q {
        return Ok(0.0);
    }
    Ok((xlog_ratio(p, q) + q - p).max(0.0))
}

/// Largest `q` in `[theta_hat, 1]` with `n_eff * d_Pois(theta_hat, q) <= budget`.
///
/// Bisection runs until the bracket can no longer be split in floating
/// point (at most [`MAX_BISECTION_STEPS`] halvings), and returns the lower,
/// always-feasible end of the bracket. Estimates at or above one return 1.
pub fn klucb_invert(theta_hat: f64, n_eff: f64, budget: f64) -> Result<f64, DivergenceError> {
    if !(n_eff > 0.0) || !n_eff.is_finite() {
        return Err(DivergenceError::Domain("effective count must be positive"));
    }
    if !(budget >= 0.0) {
        return Err(DivergenceError::Domain("budget must be nonnegative"));
    }
    if !(theta_hat >= 0.0) {
        return Err(DivergenceError::Domain("estimate must be nonnegative"));
    }
    if theta_hat >= 1.0 {
        return Ok(1.0);
    }
    if budget == 0.0 {
        return Ok(theta_hat);
    }
    let within = |q: f64| n_eff * poisson_kl(theta_hat, q).expect("q > theta_hat >= 0") <= budget;
    if within(1.0) {
        return Ok(1.0);
    }

    let (mut lo, mut hi) = (theta_hat, 1.0);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if within(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
