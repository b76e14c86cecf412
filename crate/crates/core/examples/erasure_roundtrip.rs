//! Extends a small blob, throws away three quarters of it and decodes the
//! rest back by iterated row/column recovery.

use std::collections::BTreeMap;

use pandas_das::erasure::{extend_payloads, reconstructable, recover_matrix, ExtensionOrder};
use pandas_das::grid::{CellIndex, GridParams};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let params = GridParams::with_cell_bytes(8, 16, 0).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let original: Vec<Vec<u8>> = (0..params.k * params.k)
        .map(|_| (0..params.cell_payload_bytes).map(|_| rng.gen()).collect())
        .collect();
    let extended = extend_payloads(&original, &params, ExtensionOrder::RowsFirst).expect("extension");
    println!("extended {}x{} -> {}x{}", params.k, params.k, params.n, params.n);

    // the top-left quadrant alone always decodes
    let quadrant: BTreeMap<CellIndex, Vec<u8>> = (0..params.k as u16)
        .flat_map(|r| (0..params.k as u16).map(move |c| CellIndex::new(r, c)))
        .map(|c| (c, extended[c.flat(params.n)].clone()))
        .collect();
    let recovered = recover_matrix(&quadrant, &params).expect("quadrant decodes");
    assert_eq!(recovered, extended);
    println!("decoded from the original quadrant ({} cells)", quadrant.len());

    // random quarter-size subsets may or may not decode
    let cells = params.n * params.n;
    for trial in 0..5 {
        let keep: BTreeMap<CellIndex, Vec<u8>> = sample(&mut rng, cells, cells / 4 + 4 * trial)
            .into_iter()
            .map(|f| CellIndex::from_flat(f, params.n))
            .map(|c| (c, extended[c.flat(params.n)].clone()))
            .collect();
        let ok = reconstructable(keep.keys().copied(), &params);
        let decoded = recover_matrix(&keep, &params).is_ok_and(|m| m == extended);
        println!("{:>3} random cells: reconstructable {ok}, decoded {decoded}", keep.len());
    }
}
