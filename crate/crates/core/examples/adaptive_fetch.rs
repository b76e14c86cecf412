//! The default adaptive schedule against the constant baseline on the same
//! 400-node slot.

use pandas_das::harness::simulate;
use pandas_das::protocol::{constant_schedule, default_schedule};
use pandas_das::simnet::{ScenarioConfig, ScheduleKind};

fn main() {
    for (name, s) in [("adaptive", default_schedule()), ("constant", constant_schedule())] {
        let rounds: Vec<String> = (1..=7).map(|i| format!("{}ms/k={}", s.timeout(i).as_millis(), s.redundancy(i))).collect();
        println!("{name}: {}", rounds.join(" "));
    }
    let base = ScenarioConfig {
        node_count: 400,
        grid_k: 64,
        ..Default::default()
    };
    for kind in [ScheduleKind::Adaptive, ScheduleKind::Constant] {
        let mut cfg = base.clone();
        cfg.schedule.kind = kind;
        let r = simulate(&cfg, 1).expect("slot");
        let a = &r.aggregate;
        println!(
            "{kind:?}: success {:.3}, sampling P50 {:.0} P99 {:.0} max {:.0} ms, {:.0} queries/node",
            a.success_fraction,
            a.sampling.p50.unwrap_or(f64::NAN),
            a.sampling.p99.unwrap_or(f64::NAN),
            a.sampling.max.unwrap_or(f64::NAN),
            a.queries_per_node
        );
    }
}
