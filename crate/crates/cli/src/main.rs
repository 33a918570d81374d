use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use delaybandit::bounds::upper_bound_constants;
use delaybandit::environment::{BanditInstance, InstanceSpec};
use delaybandit::harness::diagnostics::{self, ConcentrationConfig, UnbiasednessConfig};
use delaybandit::harness::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "delaybandit", version, about = "Bandits with delayed conversion feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write traces.csv, aggregate.csv and regret.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output_dir, else ./results).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print lower-bound and upper-bound constants of an instance as JSON.
    Bounds {
        /// Experiment config or bare instance JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
    },
    /// Run a diagnostics suite and print its report as JSON.
    Diagnose {
        suite: Suite,
        /// Monte-Carlo replications, random instances or grid points, depending on the suite.
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Sandwich,
    Inversion,
    Bounds,
    Estimators,
    Unbiasedness,
    Concentration,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, threads } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let result = run_experiment(&cfg, threads)?;
            result.write_to(&out)?;
            for policy in result.policies() {
                let row = result.last(policy).expect("every policy has checkpoints");
                println!("{policy}: t={} mean={:.4} se={:.4}", row.checkpoint_t, row.mean, row.se);
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Bounds { config, epsilon, eta } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
            let spec = match ExperimentConfig::from_json(&text) {
                Ok(cfg) => cfg.instance,
                Err(_) => serde_json::from_str::<InstanceSpec>(&text)
                    .context("neither an experiment config nor an instance")?,
            };
            let instance = BanditInstance::from_spec(&spec)?;
            let uncensored = upper_bound_constants(instance.theta(), 1.0, epsilon, eta)?;
            let censored = match instance.censor_window() {
                Some(m) => Some(upper_bound_constants(instance.theta(), instance.delays().cdf(m), epsilon, eta)?),
                None => None,
            };
            let report = json!({ "instance": instance.id(), "uncensored": uncensored, "censored": censored });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Diagnose { suite, replications, seed } => {
            let (report, passed) = match suite {
                Suite::Sandwich => {
                    let r = diagnostics::divergence_sandwich(0.001);
                    (serde_json::to_value(&r)?, r.passed)
                }
                Suite::Inversion => {
                    let r = diagnostics::kl_inversion(replications.unwrap_or(1000), seed);
                    (serde_json::to_value(&r)?, r.passed)
                }
                Suite::Bounds => {
                    let r = diagnostics::bound_monotonicity(replications.unwrap_or(100), seed);
                    (serde_json::to_value(&r)?, r.passed)
                }
                Suite::Estimators => {
                    let r = diagnostics::estimator_oracle(replications.unwrap_or(1000), 2000, seed);
                    (serde_json::to_value(&r)?, r.passed)
                }
                Suite::Unbiasedness => {
                    let mut cfg = UnbiasednessConfig { seed, ..Default::default() };
                    if let Some(r) = replications {
                        cfg.replications = r;
                    }
                    if cfg.replications < 2 {
                        bail!("unbiasedness needs at least two replications");
                    }
                    let r = diagnostics::conditional_unbiasedness(&cfg);
                    (serde_json::to_value(&r)?, r.passed)
                }
                Suite::Concentration => {
                    let mut cfg = ConcentrationConfig { seed, ..Default::default() };
                    if let Some(r) = replications {
                        cfg.replications = r;
                    }
                    let r = diagnostics::concentration(&cfg);
                    (serde_json::to_value(&r)?, r.passed)
                }
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(passed)
        }
    }
}
