//! Numerical and Monte-Carlo checks of the estimators, indices and bounds.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::child_seed;
use crate::bounds::{lower_bound_censored, lower_bound_uncensored};
use crate::delay::DelayDistribution;
use crate::divergence::{bernoulli_kl, klucb_invert, poisson_kl};
use crate::environment::{BanditInstance, Environment};
use crate::estimators::ArmStats;
use crate::policies::{klucb_index, ucb_index};

/// `beta e ln(t) e^-beta`, the UCB over-estimation envelope.
pub fn ucb_envelope(beta: f64, t: u64) -> f64 {
    beta * E * (t as f64).ln() * (-beta).exp()
}

/// `e ceil(beta ln t) e^-beta`, the KL-UCB under-coverage envelope.
pub fn klucb_envelope(beta: f64, t: u64) -> f64 {
    E * (beta * (t as f64).ln()).ceil() * (-beta).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub step: f64,
    pub pairs: u64,
    pub violations: u64,
    pub passed: bool,
}

/// Checks `(1 - q) d(p, q) <= d_Pois(p, q) <= d(p, q)` for all grid points `p < q`.
pub fn divergence_sandwich(step: f64) -> SandwichReport {
    let n = (1.0 / step).round() as u64;
    let mut pairs = 0;
    let mut violations = 0;
    for i in 1..n {
        let p = i as f64 * step;
        for j in i + 1..n {
            let q = j as f64 * step;
            let d = bernoulli_kl(p, q).expect("q inside (0, 1)");
            let dp = poisson_kl(p, q).expect("q positive");
            pairs += 1;
            let slack = 1e-15 * d;
            if (1.0 - q) * d > dp + slack || dp > d + slack {
                violations += 1;
            }
        }
    }
    SandwichReport { step, pairs, violations, passed: violations == 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionReport {
    pub points: u64,
    /// Points whose index stayed below one.
    pub interior: u64,
    pub max_residual: f64,
    pub monotonicity_violations: u64,
    pub passed: bool,
}

/// Random `(theta_hat, n_eff, budget)` grid: the budget is met exactly by
/// interior indices, which grow with the budget and shrink with the count.
pub fn kl_inversion(points: u64, seed: u64) -> InversionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior = 0;
    let mut max_residual: f64 = 0.0;
    let mut monotonicity_violations = 0;
    for _ in 0..points {
        let theta = rng.gen_range(0.0..=0.99);
        let n = rng.gen_range(1.0..=1e4);
        let beta = rng.gen_range(0.0..=20.0);
        let u = klucb_invert(theta, n, beta).expect("valid arguments");
        if u < 1.0 {
            interior += 1;
            let residual = (n * poisson_kl(theta, u).expect("u positive") - beta).abs();
            max_residual = max_residual.max(residual);
        }
        let more_budget = klucb_invert(theta, n, beta * rng.gen_range(1.0..2.0) + 1e-3).expect("valid");
        let more_pulls = klucb_invert(theta, n * rng.gen_range(1.0..2.0) + 1e-3, beta).expect("valid");
        if more_budget < u || more_pulls > u {
            monotonicity_violations += 1;
        }
    }
    InversionReport {
        points,
        interior,
        max_residual,
        monotonicity_violations,
        passed: max_residual <= 1e-6 && monotonicity_violations == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundGridReport {
    pub instances: u64,
    pub tau_grid: Vec<f64>,
    /// Instances whose lower bound does not increase with `tau_m`.
    pub nonincreasing: u64,
    /// Instances whose every divergence `d(tau theta_k, tau theta*)` is nondecreasing in `tau_m`.
    pub denominators_nondecreasing: u64,
    /// Instances with `lower_bound_censored(theta, 1) == lower_bound_uncensored(theta)`.
    pub full_window_exact: u64,
    /// Instances whose lower bound is nondecreasing in `tau_m` (not expected).
    pub nondecreasing: u64,
    pub passed: bool,
}

/// Monotonicity of the censored lower bound in `tau_m` on random instances.
pub fn bound_monotonicity(instances: u64, seed: u64) -> BoundGridReport {
    let tau_grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut nonincreasing, mut denominators_nondecreasing, mut full_window_exact, mut nondecreasing) = (0, 0, 0, 0);
    let mut done = 0;
    while done < instances {
        let k = rng.gen_range(2..=5);
        let theta: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..0.99)).collect();
        let Ok(unc) = lower_bound_uncensored(&theta) else { continue };
        done += 1;
        let best = theta[unc.best_arm];
        let lbs: Vec<f64> =
            tau_grid.iter().map(|&tau| lower_bound_censored(&theta, tau).expect("valid").lower_bound).collect();
        let denominators_ok = theta.iter().filter(|&&v| v != best).all(|&v| {
            let d: Vec<f64> = tau_grid.iter().map(|&tau| bernoulli_kl(tau * v, tau * best).expect("finite")).collect();
            d.windows(2).all(|w| w[0] <= w[1])
        });
        nonincreasing += u64::from(lbs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        nondecreasing += u64::from(lbs.windows(2).all(|w| w[1] >= w[0]));
        denominators_nondecreasing += u64::from(denominators_ok);
        full_window_exact += u64::from(*lbs.last().expect("non-empty") == unc.lower_bound);
    }
    BoundGridReport {
        instances,
        tau_grid,
        nonincreasing,
        denominators_nondecreasing,
        full_window_exact,
        nondecreasing,
        passed: nonincreasing == instances && denominators_nondecreasing == instances && full_window_exact == instances,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub configs: u64,
    pub rounds: u64,
    pub max_error_geometric: f64,
    pub max_error_censored: f64,
    pub passed: bool,
}

/// Incremental effective counts against the direct weighted sums, at every
/// round of random pull sequences.
pub fn estimator_oracle(configs: u64, rounds: u64, seed: u64) -> EstimatorReport {
    let mut max_g: f64 = 0.0;
    let mut max_c: f64 = 0.0;
    for c in 0..configs {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 0, c));
        let arms = rng.gen_range(2..=5);
        let delays = DelayDistribution::geometric(rng.gen_range(1.0..=200.0)).expect("positive mean");
        let m = rng.gen_range(1..=rounds / 2) as usize;
        let decay = delays.decay().expect("geometric");
        // cdf values by age, straight from the closed form
        let table = delays.cdf_table(rounds as usize + 1);
        let weights = delays.cdf_table(m + 1);
        let mut geo = ArmStats::new(arms).with_decay(decay);
        let mut win = ArmStats::new(arms).with_window(m);
        let mut pulls: Vec<Vec<usize>> = vec![Vec::new(); arms];
        for t in 1..=rounds as usize {
            let a = rng.gen_range(0..arms);
            geo.record_pull(a);
            win.record_pull(a);
            pulls[a].push(t);
            let now = t + 1;
            let windowed = win.effective_counts_windowed(&weights);
            for k in 0..arms {
                let direct: f64 = pulls[k].iter().map(|&s| table[now - 1 - s]).sum();
                let capped: f64 = pulls[k].iter().map(|&s| table[(now - 1 - s).min(m)]).sum();
                max_g = max_g.max((geo.effective_count_geometric(k) - direct).abs());
                max_c = max_c.max((windowed[k] - capped).abs());
            }
        }
    }
    EstimatorReport {
        configs,
        rounds,
        max_error_geometric: max_g,
        max_error_censored: max_c,
        passed: max_g < 1e-9 && max_c < 1e-9,
    }
}

/// Fixed round-robin schedule for the Monte-Carlo diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnbiasednessConfig {
    pub theta: Vec<f64>,
    pub mean_delay: f64,
    pub horizon: u64,
    pub window: u64,
    pub checkpoints: Vec<u64>,
    pub replications: u64,
    pub seed: u64,
}

impl Default for UnbiasednessConfig {
    fn default() -> Self {
        Self {
            theta: vec![0.3, 0.1],
            mean_delay: 50.0,
            horizon: 5000,
            window: 200,
            checkpoints: vec![5000],
            replications: 10_000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessRow {
    pub setting: &'static str,
    pub arm: usize,
    pub checkpoint: u64,
    pub theta: f64,
    pub mean_estimate: f64,
    pub se: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub replications: u64,
    pub rows: Vec<UnbiasednessRow>,
    pub passed: bool,
}

/// Monte-Carlo mean of `S / Ñ` after each checkpoint round, within three
/// standard errors of the true rate, in both settings.
pub fn conditional_unbiasedness(cfg: &UnbiasednessConfig) -> UnbiasednessReport {
    let arms = cfg.theta.len();
    let delays = DelayDistribution::geometric(cfg.mean_delay).expect("positive mean");
    let mut rows = Vec::new();
    for (setting_index, window) in [None, Some(cfg.window)].into_iter().enumerate() {
        let instance = BanditInstance::new(cfg.theta.clone(), delays.clone(), window, cfg.horizon).expect("valid");
        let weights = window.map(|m| delays.cdf_table(m as usize + 1));
        // estimates[rep][checkpoint][arm]
        let estimates: Vec<Vec<Vec<f64>>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, setting_index as u64, rep));
                let mut env = Environment::new(&instance);
                let mut stats = match window {
                    None => ArmStats::new(arms).with_decay(delays.decay().expect("geometric")),
                    Some(m) => ArmStats::new(arms).with_window(m as usize),
                };
                let mut out = Vec::with_capacity(cfg.checkpoints.len());
                let mut next = cfg.checkpoints.iter().peekable();
                for t in 1..=cfg.horizon {
                    let arm = ((t - 1) % arms as u64) as usize;
                    let fb = env.step(arm, &mut rng).expect("within horizon");
                    stats.record_pull(arm);
                    for d in &fb.disclosures {
                        stats.record_disclosure(d.arm, d.pull_time);
                    }
                    if next.next_if_eq(&&t).is_some() {
                        let counts: Vec<f64> = match &weights {
                            None => (0..arms).map(|k| stats.effective_count_geometric(k)).collect(),
                            Some(w) => stats.effective_counts_windowed(w),
                        };
                        out.push((0..arms).map(|k| stats.successes(k) as f64 / counts[k]).collect());
                    }
                }
                out
            })
            .collect();
        let r = cfg.replications as f64;
        for (c, &checkpoint) in cfg.checkpoints.iter().enumerate() {
            for (arm, &theta) in cfg.theta.iter().enumerate() {
                let values: Vec<f64> = estimates.iter().map(|e| e[c][arm]).collect();
                let mean = values.iter().sum::<f64>() / r;
                let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
                let se = sd / r.sqrt();
                rows.push(UnbiasednessRow {
                    setting: if window.is_some() { "censored" } else { "uncensored" },
                    arm,
                    checkpoint,
                    theta,
                    mean_estimate: mean,
                    se,
                    passed: (mean - theta).abs() < 3.0 * se,
                });
            }
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    UnbiasednessReport { replications: cfg.replications, rows, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub theta: Vec<f64>,
    pub mean_delay: f64,
    /// Decision round at which the indices are evaluated.
    pub t: u64,
    pub betas: Vec<f64>,
    pub replications: u64,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            theta: vec![0.3, 0.1, 0.0],
            mean_delay: 20.0,
            t: 1000,
            betas: vec![3.0, 5.0],
            replications: 10_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub index: &'static str,
    pub beta: f64,
    pub arm: usize,
    pub violations: u64,
    pub frequency: f64,
    pub envelope: f64,
    /// The envelope is at least one, so the check holds trivially.
    pub vacuous: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub replications: u64,
    pub t: u64,
    pub rows: Vec<ConcentrationRow>,
    pub passed: bool,
}

/// Frequency of `theta > UCB` and `KL-UCB <= theta` at round `t` under a
/// fixed round-robin schedule, compared with the analytic envelopes.
pub fn concentration(cfg: &ConcentrationConfig) -> ConcentrationReport {
    let arms = cfg.theta.len();
    let delays = DelayDistribution::geometric(cfg.mean_delay).expect("positive mean");
    let decay = delays.decay().expect("geometric");
    let instance = BanditInstance::new(cfg.theta.clone(), delays, None, cfg.t).expect("valid");
    // per replication: (pulls, n_eff, successes) of every arm at decision round t
    let samples: Vec<Vec<(f64, f64, f64)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 0, rep));
            let mut env = Environment::new(&instance);
            let mut stats = ArmStats::new(arms).with_decay(decay);
            for s in 1..cfg.t {
                let arm = ((s - 1) % arms as u64) as usize;
                let fb = env.step(arm, &mut rng).expect("within horizon");
                stats.record_pull(arm);
                for d in &fb.disclosures {
                    stats.record_disclosure(d.arm, d.pull_time);
                }
            }
            (0..arms)
                .map(|k| (stats.pulls(k) as f64, stats.effective_count_geometric(k), stats.successes(k) as f64))
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        for (index, envelope) in [("ucb", ucb_envelope(beta, cfg.t)), ("klucb", klucb_envelope(beta, cfg.t))] {
            for (arm, &theta) in cfg.theta.iter().enumerate() {
                let violations = samples
                    .iter()
                    .filter(|s| {
                        let (n, n_eff, succ) = s[arm];
                        if n_eff <= 0.0 {
                            return false;
                        }
                        let theta_hat = succ / n_eff;
                        match index {
                            "ucb" => theta > ucb_index(theta_hat, n, n_eff, beta),
                            _ => klucb_index(theta_hat, n_eff, beta) <= theta,
                        }
                    })
                    .count() as u64;
                let frequency = violations as f64 / cfg.replications as f64;
                rows.push(ConcentrationRow {
                    index,
                    beta,
                    arm,
                    violations,
                    frequency,
                    envelope,
                    vacuous: envelope >= 1.0,
                    passed: frequency <= envelope,
                });
            }
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    ConcentrationReport { replications: cfg.replications, t: cfg.t, rows, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn envelope_values() {
        // high-precision evaluations
        assert_abs_diff_eq!(ucb_envelope(3.0, 100), 1.869_726_034_420_508, epsilon = 1e-13);
        assert_abs_diff_eq!(ucb_envelope(5.0, 1000), 0.632_599_756_107_920_3, epsilon = 1e-13);
        assert_abs_diff_eq!(klucb_envelope(5.0, 1000), 0.641_047_361_105_696_3, epsilon = 1e-13);
        assert!(ucb_envelope(20.0, 1000) < 1e-6);
    }

    #[test]
    fn small_grids_pass() {
        assert!(divergence_sandwich(0.01).passed);
        assert!(kl_inversion(200, 1).passed);
        let b = bound_monotonicity(20, 3);
        assert!(b.passed, "{b:?}");
        let e = estimator_oracle(5, 300, 4);
        assert!(e.passed, "{e:?}");
    }

    #[test]
    fn small_monte_carlo_runs() {
        let cfg = ConcentrationConfig { t: 200, replications: 300, ..Default::default() };
        let report = concentration(&cfg);
        assert_eq!(report.rows.len(), 2 * 2 * 3);
        // the arm that never converts keeps theta_hat = 0 <= every index
        assert!(report.rows.iter().filter(|r| r.arm == 2).all(|r| r.violations == 0));
        assert!(report.rows.iter().filter(|r| r.beta == 3.0 && r.index == "ucb").all(|r| r.vacuous));

        let cfg = UnbiasednessConfig {
            horizon: 400,
            window: 40,
            checkpoints: vec![200, 400],
            replications: 400,
            ..Default::default()
        };
        let report = conditional_unbiasedness(&cfg);
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        assert!(report.rows.iter().all(|r| r.se > 0.0));
    }
}
