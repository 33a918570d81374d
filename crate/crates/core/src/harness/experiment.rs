use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{child_seed, render_svg, ExperimentConfig, HarnessError};
use crate::environment::BanditInstance;
use crate::policies::Setting;
use crate::regret::{checkpoints, regret_trace, RegretTrace};

/// Mean pseudo-regret of one policy at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub policy: String,
    pub checkpoint_t: u64,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub runs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    policies: Vec<String>,
    /// `traces[p][r]` is run `r + 1` of policy `p`.
    traces: Vec<Vec<RegretTrace>>,
    aggregates: Vec<AggregateRow>,
}

/// Runs every (policy, replication) pair, on `threads` workers if given.
/// Results do not depend on the number of workers.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let base = BanditInstance::from_spec(&config.instance)?;
    let cps = checkpoints(base.horizon(), config.checkpoint_stride);

    let mut instances = Vec::with_capacity(config.policies.len());
    let mut policies = Vec::with_capacity(config.policies.len());
    for p in &config.policies {
        let window = match p.resolve_setting(&base)? {
            Setting::Censored { window } => Some(window),
            Setting::Uncensored => None,
        };
        instances.push(base.with_censor_window(window)?);
        policies.push(p.label(&base));
    }

    let jobs: Vec<(usize, u64)> =
        (0..config.policies.len()).flat_map(|p| (0..config.replications).map(move |r| (p, r))).collect();
    let run = |&(p, r): &(usize, u64)| {
        let seed = child_seed(config.seed, p as u64, r + 1);
        let mut trace = regret_trace(&instances[p], &config.policies[p], seed, &cps)?;
        trace.policy.clone_from(&policies[p]);
        Ok::<_, HarnessError>(trace)
    };
    let flat: Vec<RegretTrace> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?,
        None => jobs.par_iter().map(run).collect::<Result<_, _>>()?,
    };

    let mut traces: Vec<Vec<RegretTrace>> = vec![Vec::new(); policies.len()];
    for ((p, _), trace) in jobs.iter().zip(flat) {
        traces[*p].push(trace);
    }
    let aggregates = aggregate(&policies, &traces, &cps);
    Ok(ExperimentResult { policies, traces, aggregates })
}

fn aggregate(policies: &[String], traces: &[Vec<RegretTrace>], cps: &[u64]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (name, runs) in policies.iter().zip(traces) {
        let r = runs.len();
        for (i, &t) in cps.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|tr| tr.cum_pseudo_regret[i]).collect();
            let mean = values.iter().sum::<f64>() / r as f64;
            let sd = if r > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(AggregateRow {
                policy: name.clone(),
                checkpoint_t: t,
                mean,
                sd,
                se: sd / (r as f64).sqrt(),
                runs: r as u64,
            });
        }
    }
    rows
}

impl ExperimentResult {
    pub fn policies(&self) -> &[String] {
        &self.policies
    }

    pub fn traces(&self, policy: &str) -> Option<&[RegretTrace]> {
        let p = self.policies.iter().position(|n| n == policy)?;
        Some(&self.traces[p])
    }

    pub fn aggregates(&self) -> &[AggregateRow] {
        &self.aggregates
    }

    /// Aggregate of `policy` at checkpoint `t`.
    pub fn at(&self, policy: &str, t: u64) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| r.policy == policy && r.checkpoint_t == t)
    }

    /// Aggregate of `policy` at its last checkpoint.
    pub fn last(&self, policy: &str) -> Option<&AggregateRow> {
        self.aggregates.iter().rev().find(|r| r.policy == policy)
    }

    /// `policy,run,checkpoint_t,cum_pseudo_regret,cum_reward`, one row per
    /// checkpoint, sorted by policy (config order), run and checkpoint.
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("policy,run,checkpoint_t,cum_pseudo_regret,cum_reward\n");
        for (name, runs) in self.policies.iter().zip(&self.traces) {
            for (r, trace) in runs.iter().enumerate() {
                for ((t, regret), reward) in
                    trace.checkpoints.iter().zip(&trace.cum_pseudo_regret).zip(&trace.cum_reward)
                {
                    writeln!(out, "{name},{},{t},{regret},{reward}", r + 1).expect("write to string");
                }
            }
        }
        out
    }

    /// `policy,checkpoint_t,mean,sd,se,runs`.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("policy,checkpoint_t,mean,sd,se,runs\n");
        for row in &self.aggregates {
            writeln!(out, "{},{},{},{},{},{}", row.policy, row.checkpoint_t, row.mean, row.sd, row.se, row.runs)
                .expect("write to string");
        }
        out
    }

    /// Writes `traces.csv`, `aggregate.csv` and `regret.svg` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| HarnessError::Write { path, source })
        };
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Write { path: dir.to_owned(), source })?;
        write("traces.csv", self.traces_csv())?;
        write("aggregate.csv", self.aggregate_csv())?;
        write("regret.svg", render_svg(&self.aggregates, "mean pseudo-regret"))
    }
}
