//! Library side of the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::grid::GridParams;
use crate::protocol::seeding::{PolicyKind, SeedingPolicy};
use crate::simnet::{run_slot, ScenarioConfig};

use super::metrics::{csv_bytes, ScenarioResult};
use super::HarnessError;

pub const NODES_CSV: &str = "nodes.csv";
pub const ROUNDS_CSV: &str = "rounds.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const CONFIG_TOML: &str = "config.toml";

/// Runs one slot and collects its metrics.
pub fn simulate(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioResult, HarnessError> {
    let slot = run_slot(cfg, seed)?;
    Ok(ScenarioResult::from_slot(&slot))
}

#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub nodes: PathBuf,
    pub rounds: PathBuf,
    pub aggregate: PathBuf,
    pub config: PathBuf,
}

/// Writes the node, round and aggregate CSVs plus the resolved config into
/// `dir`. Every file is rendered in memory first and moved into place by
/// rename, so a failure never leaves a truncated file behind.
pub fn write_outputs(result: &ScenarioResult, dir: &Path) -> Result<OutputFiles, HarnessError> {
    let files = [
        (NODES_CSV, csv_bytes(&result.nodes)?),
        (ROUNDS_CSV, csv_bytes(&result.rounds)?),
        (AGGREGATE_CSV, csv_bytes(&[result.aggregate_row("", "")])?),
        (CONFIG_TOML, result.config.to_toml_string().into_bytes()),
    ];
    fs::create_dir_all(dir)?;
    write_atomically(dir, &files)?;
    Ok(OutputFiles {
        nodes: dir.join(NODES_CSV),
        rounds: dir.join(ROUNDS_CSV),
        aggregate: dir.join(AGGREGATE_CSV),
        config: dir.join(CONFIG_TOML),
    })
}

pub(crate) fn write_atomically(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), HarnessError> {
    let tmp = |name: &str| dir.join(format!(".{name}.tmp"));
    let staged: Result<(), std::io::Error> = files.iter().try_for_each(|(name, bytes)| fs::write(tmp(name), bytes));
    if let Err(e) = staged {
        for (name, _) in files {
            let _ = fs::remove_file(tmp(name));
        }
        return Err(e.into());
    }
    for (name, _) in files {
        fs::rename(tmp(name), dir.join(name))?;
    }
    Ok(())
}

/// Runs `base` once per value of `param`, in parallel, and returns results
/// in input order. All values are validated before any run starts.
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[String],
    seed: u64,
) -> Result<Vec<ScenarioResult>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| base.with_param(param, v))
        .collect::<Result<Vec<_>, _>>()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(configs.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ScenarioResult, HarnessError>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = simulate(&configs[i], seed);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every index ran"))
        .collect()
}

/// Builder upload for `policy` on `grid` when every line has enough holders.
pub fn policy_volume(policy: PolicyKind, redundancy_k: u32, grid: &GridParams) -> u64 {
    let p = match policy {
        PolicyKind::Minimal => SeedingPolicy::minimal(),
        PolicyKind::Single => SeedingPolicy::single(),
        PolicyKind::Redundant => SeedingPolicy::redundant(redundancy_k),
    };
    p.budget_bytes(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::{read_csv, PhaseMetrics};

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            node_count: 10,
            grid_k: 16,
            samples: 8,
            rows_per_node: 2,
            ..Default::default()
        }
    }

    #[test]
    fn budgets_match_closed_form() {
        let g = GridParams::default();
        assert_eq!(policy_volume(PolicyKind::Minimal, 8, &g), 36_700_160);
        assert_eq!(policy_volume(PolicyKind::Single, 8, &g), 146_800_640);
        assert_eq!(policy_volume(PolicyKind::Redundant, 8, &g), 1_174_405_120);
    }

    #[test]
    fn outputs_are_written_and_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let r = simulate(&tiny(), 3).unwrap();
        let files = write_outputs(&r, dir.path()).unwrap();
        let rows: Vec<PhaseMetrics> = read_csv(fs::File::open(&files.nodes).unwrap()).unwrap();
        assert_eq!(rows, r.nodes);
        assert_eq!(rows.len(), 10);
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
    }

    #[test]
    fn sweep_keeps_value_order_and_rejects_unknown_keys() {
        let values: Vec<String> = ["0.0", "0.5"].iter().map(|s| s.to_string()).collect();
        let out = sweep(&tiny(), "dead_fraction", &values, 2).unwrap();
        assert_eq!(out[0].config.dead_fraction, 0.0);
        assert_eq!(out[1].config.dead_fraction, 0.5);
        assert_eq!(out[1].aggregate.live, 5);
        assert!(sweep(&tiny(), "bogus", &values, 2).is_err());
        assert!(sweep(&tiny(), "dead_fraction", &[], 2).is_err());
    }
}
