use std::fs;
use std::path::Path;
use std::process::Command;

use pandas_das::harness::{read_csv, AggregateRow, PhaseMetrics};

const TINY: &str = "node_count = 10\ngrid_k = 16\nrows_per_node = 4\nsamples = 8\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pandas-das"))
}

fn simulate(config: &Path, out: &Path, seed: &str) -> std::process::Output {
    bin()
        .args(["simulate", "--config"])
        .arg(config)
        .args(["--seed", seed, "--out"])
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn simulate_writes_one_row_per_node_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = simulate(&cfg, &a, "5");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("success_fraction"));
    assert!(simulate(&cfg, &b, "5").status.success());

    let text = fs::read_to_string(a.join("nodes.csv")).unwrap();
    assert!(text.starts_with("slot,seed,node,dead,time_to_seeding_ms,"));
    let rows: Vec<PhaseMetrics> = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.seed == 5));
    for f in ["nodes.csv", "rounds.csv", "aggregate.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let agg: Vec<AggregateRow> = read_csv(fs::File::open(a.join("aggregate.csv")).unwrap()).unwrap();
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].nodes, 10);
}

#[test]
fn invalid_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "node_count = 0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = simulate(&cfg, &out_dir, "1");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("node_count"));
    assert!(!out_dir.exists());

    let missing = simulate(&dir.path().join("nope.toml"), &out_dir, "1");
    assert!(!missing.status.success());
    assert!(!out_dir.exists());
}

#[test]
fn sweep_emits_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--param", "dead_fraction", "--values", "0,0.5", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<AggregateRow> = read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].value.as_str(), rows[0].live), ("0", 10));
    assert_eq!((rows[1].value.as_str(), rows[1].live), ("0.5", 5));

    let bad = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--param", "no_such_key", "--values", "1"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no_such_key"));
}

fn stdout(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

#[test]
fn analytical_subcommands() {
    let p: f64 = stdout(&["fp-bound"]).parse().unwrap();
    assert!(p < 1e-9 && format!("{p:.1e}") == "6.2e-10", "{p}");
    let one: f64 = stdout(&["fp-bound", "--samples", "0"]).parse().unwrap();
    assert_eq!(one, 1.0);
    assert_eq!(stdout(&["min-samples", "--target", "0.9"]), "1");
    assert_eq!(stdout(&["policy-volume", "--policy", "minimal"]), "36700160");
    assert_eq!(stdout(&["policy-volume", "--policy", "single"]), "146800640");
    assert_eq!(stdout(&["policy-volume", "--policy", "redundant", "--redundancy", "8"]), "1174405120");
}
