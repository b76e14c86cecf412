use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pandas_das::availability::{false_positive_bound, min_samples_for, SamplingParams};
use pandas_das::grid::GridParams;
use pandas_das::harness::metrics::csv_bytes;
use pandas_das::harness::{self, HarnessError};
use pandas_das::protocol::PolicyKind;
use pandas_das::simnet::ScenarioConfig;

#[derive(Parser)]
#[command(name = "pandas-das", version, about = "Slot simulator and sampling calculators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one slot and write nodes.csv, rounds.csv, aggregate.csv and config.toml.
    Simulate {
        /// Scenario TOML; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Extra `key=value` overrides applied after the config file.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Run the scenario once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Config key, dotted for nested tables (e.g. `latency.mean_rtt_ms`).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Aggregate CSV path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that `s` samples all miss a maximal withholding.
    FpBound {
        #[arg(short, long, default_value_t = 73)]
        samples: usize,
        #[arg(short, long, default_value_t = 512)]
        n: usize,
        #[arg(short, long, default_value_t = 256)]
        k: usize,
    },
    /// Smallest sample count whose bound is at most `target`.
    MinSamples {
        #[arg(short, long, default_value_t = 1e-9)]
        target: f64,
        #[arg(short, long, default_value_t = 512)]
        n: usize,
        #[arg(short, long, default_value_t = 256)]
        k: usize,
    },
    /// Builder upload in bytes for a seeding policy.
    PolicyVolume {
        #[arg(short, long, default_value = "redundant")]
        policy: PolicyKind,
        #[arg(short, long, default_value_t = 8)]
        redundancy: u32,
        #[arg(short, long, default_value_t = 256)]
        k: usize,
    },
}

fn load(config: Option<&Path>) -> Result<ScenarioConfig, HarnessError> {
    Ok(match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            seed,
            out,
            params,
        } => {
            let mut cfg = load(config.as_deref())?;
            for kv in &params {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| HarnessError::Usage(format!("--param expects KEY=VALUE, got `{kv}`")))?;
                cfg = cfg.with_param(k, v)?;
            }
            let seed = seed.unwrap_or(cfg.seed);
            let result = harness::simulate(&cfg, seed)?;
            harness::write_outputs(&result, &out)?;
            let a = &result.aggregate;
            println!("nodes {} live {} seed {}", a.nodes, a.live, seed);
            println!("success_fraction {}", a.success_fraction);
        }
        Cmd::Sweep {
            config,
            seed,
            param,
            values,
            out,
        } => {
            let cfg = load(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let results = harness::sweep(&cfg, &param, &values, seed)?;
            let rows: Vec<_> = results
                .iter()
                .zip(&values)
                .map(|(r, v)| r.aggregate_row(&param, v))
                .collect();
            let bytes = csv_bytes(&rows)?;
            match out {
                Some(path) => {
                    let tmp = path.with_extension("csv.tmp");
                    std::fs::write(&tmp, &bytes)?;
                    std::fs::rename(&tmp, &path)?;
                    for r in &rows {
                        println!("{}={} success_fraction {}", param, r.value, r.success_fraction);
                    }
                }
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
        Cmd::FpBound { samples, n, k } => {
            let p = false_positive_bound(&SamplingParams { s: samples, n, k })?;
            println!("{p:e}");
        }
        Cmd::MinSamples { target, n, k } => {
            println!("{}", min_samples_for(target, n, k)?);
        }
        Cmd::PolicyVolume { policy, redundancy, k } => {
            let grid = GridParams::new(k).map_err(|e| HarnessError::Usage(e.to_string()))?;
            println!("{}", harness::policy_volume(policy, redundancy, &grid));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
