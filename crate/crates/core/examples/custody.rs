//! Custody assignment: which rows and columns a node stores, and how many
//! nodes back each line in a 1,000-node network.

use pandas_das::assignment::{custody_cells, sigma, NodeId, PeerTable};
use pandas_das::grid::{GridParams, LineId};
use pandas_das::EpochSeed;

fn main() {
    let params = GridParams::default();
    let es = EpochSeed::new(EpochSeed::epoch_of_slot(100), [9; 32]);
    let me = NodeId::synthetic(0);
    let a = sigma(me, &es, &params, 8).expect("assignment");
    println!("rows {:?}", a.rows);
    println!("cols {:?}", a.cols);
    println!("custody cells: {}", custody_cells(&a, &params).len());

    let next = EpochSeed::new(es.epoch + 1, es.seed);
    let b = sigma(me, &next, &params, 8).expect("assignment");
    println!("next epoch rows {:?}", b.rows);

    let ids: Vec<NodeId> = (0..1000).map(NodeId::synthetic).collect();
    let table = PeerTable::build(ids, &es, &params, 8).expect("table");
    let counts: Vec<usize> = (0..params.n as u16).map(|r| table.line_holders(LineId::row(r)).len()).collect();
    let min = counts.iter().min().unwrap();
    let max = counts.iter().max().unwrap();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    println!("holders per row: min {min}, mean {mean:.1}, max {max}");
}
