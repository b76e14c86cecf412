//! Deadline success as more of the network goes dead or drops out of view.

use pandas_das::harness::sweep;
use pandas_das::simnet::ScenarioConfig;

fn main() {
    let base = ScenarioConfig {
        node_count: 400,
        grid_k: 64,
        ..Default::default()
    };
    let values: Vec<String> = ["0", "0.2", "0.4", "0.6", "0.8"].iter().map(|s| s.to_string()).collect();
    for param in ["dead_fraction", "out_of_view_fraction"] {
        let results = sweep(&base, param, &values, 1).expect("sweep");
        for (v, r) in values.iter().zip(&results) {
            println!("{param} = {v:<4} success {:>5.1}%", 100.0 * r.aggregate.success_fraction);
        }
    }
}
