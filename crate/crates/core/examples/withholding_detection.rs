//! A builder withholds the largest stealthy square; every sampling node
//! should end up with an unavailable verdict.

use pandas_das::availability::max_withholding_pattern;
use pandas_das::grid::GridParams;
use pandas_das::harness::simulate;
use pandas_das::protocol::Verdict;
use pandas_das::simnet::ScenarioConfig;

fn main() {
    let g = GridParams::new(64).unwrap();
    let anchors = (0..=64u16).collect();
    let w = max_withholding_pattern(&anchors, &anchors, &g).unwrap();
    println!(
        "withholding {} of {} cells; complement decodable: {}",
        w.withheld.len(),
        g.n * g.n,
        !w.is_effective(&g)
    );

    let cfg = ScenarioConfig {
        node_count: 300,
        grid_k: 64,
        samples: 0,
        withhold: true,
        ..Default::default()
    };
    for seed in 1..=3 {
        let r = simulate(&cfg, seed).expect("slot");
        let unavailable = r.nodes.iter().filter(|n| n.verdict == Verdict::Unavailable).count();
        println!("seed {seed}: {unavailable}/{} nodes report unavailable", r.nodes.len());
    }
}
