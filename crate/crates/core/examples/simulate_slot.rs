//! Runs one slot and writes the per-node, per-round and aggregate CSVs.
//!
//! `cargo run --release --example simulate_slot -- [out_dir] [key=value ...]`

use std::path::PathBuf;

use pandas_das::harness::{simulate, write_outputs};
use pandas_das::simnet::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "slot-out".into()));
    let mut cfg = ScenarioConfig {
        node_count: 500,
        grid_k: 128,
        ..Default::default()
    };
    for kv in args {
        let (k, v) = kv.split_once('=').ok_or("expected key=value")?;
        cfg = cfg.with_param(k, v)?;
    }
    let r = simulate(&cfg, cfg.seed)?;
    let files = write_outputs(&r, &out)?;
    let a = &r.aggregate;
    println!("success {:.3} over {} live nodes", a.success_fraction, a.live);
    for (name, p) in [("seeding", a.seeding), ("consolidation", a.consolidation), ("sampling", a.sampling)] {
        println!(
            "{name:<14} n={:<5} P50 {:>6.0}  P90 {:>6.0}  P99 {:>6.0}  max {:>6.0} ms",
            p.completed,
            p.p50.unwrap_or(f64::NAN),
            p.p90.unwrap_or(f64::NAN),
            p.p99.unwrap_or(f64::NAN),
            p.max.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", files.nodes.display());
    Ok(())
}
