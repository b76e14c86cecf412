//! Oracles shared by the integration tests. None of them call into the
//! crate's decoding or closure code.
#![allow(dead_code)]

use pandas_das::erasure::{extend_payloads, ExtensionOrder};
use pandas_das::grid::GridParams;

/// Iterated line decoding on an `n × n` availability mask, by repeated full
/// scans until nothing changes.
pub fn peel(mask: &[bool], n: usize, k: usize) -> Vec<bool> {
    let mut m = mask.to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            let row = (0..n).filter(|&j| m[i * n + j]).count();
            if row >= k && row < n {
                (0..n).for_each(|j| m[i * n + j] = true);
                changed = true;
            }
            let col = (0..n).filter(|&j| m[j * n + i]).count();
            if col >= k && col < n {
                (0..n).for_each(|j| m[j * n + i] = true);
                changed = true;
            }
        }
        if !changed {
            return m;
        }
    }
}

/// Carry-less multiply modulo x^16 + x^12 + x^3 + x + 1.
pub fn gf_mul(a: u16, b: u16) -> u16 {
    let (mut a, mut b, mut acc) = (a as u32, b as u32, 0u32);
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & 0x1_0000 != 0 {
            a ^= 0x1_100B;
        }
    }
    acc as u16
}

pub fn gf_inv(a: u16) -> u16 {
    // a^(2^16 - 2)
    let (mut base, mut e, mut r) = (a, 65_534u32, 1u16);
    while e > 0 {
        if e & 1 != 0 {
            r = gf_mul(r, base);
        }
        base = gf_mul(base, base);
        e >>= 1;
    }
    r
}

/// Rank over GF(2^16) by Gaussian elimination.
pub fn gf_rank(mut rows: Vec<Vec<u16>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else { continue };
        rows.swap(rank, p);
        let inv = gf_inv(rows[rank][c]);
        let pivot: Vec<u16> = rows[rank].iter().map(|&x| gf_mul(x, inv)).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let f = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x ^= gf_mul(f, y);
                }
            }
        }
        rows[rank] = pivot;
        rank += 1;
    }
    rank
}

/// Generator of the 2D code: row `cell` holds that cell's symbol as a
/// function of the `k²` original symbols. Built by extending unit blobs.
pub fn generator(k: usize) -> Vec<Vec<u16>> {
    let p = GridParams::with_cell_bytes(k, 2, 0).unwrap();
    let cells = p.n * p.n;
    let mut g = vec![vec![0u16; k * k]; cells];
    for u in 0..k * k {
        let mut blob = vec![vec![0u8; 2]; k * k];
        blob[u] = vec![1, 0];
        let ext = extend_payloads(&blob, &p, ExtensionOrder::RowsFirst).unwrap();
        for (cell, payload) in ext.iter().enumerate() {
            g[cell][u] = u16::from_le_bytes([payload[0], payload[1]]);
        }
    }
    g
}

/// Whether the cells in `mask` determine the original blob.
pub fn rank_decodable(g: &[Vec<u16>], mask: &[bool], k: usize) -> bool {
    let rows: Vec<Vec<u16>> = g.iter().zip(mask).filter(|(_, &m)| m).map(|(r, _)| r.clone()).collect();
    rows.len() >= k * k && gf_rank(rows) == k * k
}
