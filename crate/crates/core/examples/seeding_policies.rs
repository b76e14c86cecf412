//! Builder upload per seeding policy, and what a boost map tells one node.

use pandas_das::assignment::{NodeId, PeerIdx, PeerTable};
use pandas_das::grid::GridParams;
use pandas_das::protocol::{build_boost_maps, plan_seeding, SeedingPolicy};
use pandas_das::EpochSeed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let params = GridParams::default();
    let es = EpochSeed::new(0, [1; 32]);
    let ids: Vec<NodeId> = (0..1000).map(NodeId::synthetic).collect();
    let table = PeerTable::build(ids, &es, &params, 8).expect("table");
    let view: Vec<PeerIdx> = table.peers().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    for policy in [SeedingPolicy::minimal(), SeedingPolicy::single(), SeedingPolicy::redundant(8)] {
        let plan = plan_seeding(policy, &table, &view, None, &mut rng);
        println!(
            "{:<9} budget {:>13} B, planned {:>13} B, {} recipients, {} deliveries",
            policy.kind.to_string(),
            policy.budget_bytes(&params),
            plan.payload_bytes(),
            plan.recipients().len(),
            plan.deliveries.len()
        );
    }

    let plan = plan_seeding(SeedingPolicy::redundant(8), &table, &view, None, &mut rng);
    let maps = build_boost_maps(&plan, &table);
    let (node, map) = maps.iter().next().expect("someone was seeded");
    let cells: usize = map.entries.values().map(|c| c.len()).sum();
    println!(
        "node {} was seeded {} cells; its boost map names {} peers and {} cells",
        node.get(),
        plan.cells_for(*node).len(),
        map.entries.len(),
        cells
    );
}
