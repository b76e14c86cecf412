//! Systematic Reed-Solomon coding of rows and columns over GF(2^16).
//!
//! A line of `n` cells is the evaluation of a polynomial of degree `< k` at
//! the points `0..n`; positions `[0, k)` carry the original data and
//! `[k, n)` the parity. Each cell payload is split into 16-bit symbols and
//! coded independently per symbol position.

pub mod gf16;

use std::collections::BTreeMap;

use crate::grid::{BlobId, Cell, CellIndex, ExtendedBlobMatrix, GridError, GridParams, LineId, LineKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ErasureError {
    #[error("expected {expected} original payloads, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("payload of {got} bytes, expected {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("cell payload size {0} is odd; 16-bit symbols need an even size")]
    OddPayload(usize),
    #[error("{line}: {have} shares, need {need}")]
    InsufficientShares { line: LineId, have: usize, need: usize },
    #[error("{line}: shares do not lie on a single codeword")]
    InconsistentShares { line: LineId },
    #[error("share position {position} out of range for n = {n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("available cells do not determine the matrix")]
    NotReconstructable,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Known shares of one line, keyed by position along the line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineCodeword {
    pub line: LineId,
    pub shares: BTreeMap<u16, Vec<u8>>,
}

impl LineCodeword {
    pub fn new(line: LineId) -> Self {
        Self {
            line,
            shares: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, position: u16, payload: Vec<u8>) {
        self.shares.insert(position, payload);
    }
}

/// Which dimension is extended first in [`extend_payloads`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionOrder {
    RowsFirst,
    ColumnsFirst,
}

fn to_symbols(bytes: &[u8]) -> Vec<u16> {
    bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect()
}

fn from_symbols(symbols: &[u16]) -> Vec<u8> {
    symbols.iter().flat_map(|s| s.to_le_bytes()).collect()
}

fn check_payload_size(params: &GridParams) -> Result<(), ErasureError> {
    if !params.cell_payload_bytes.is_multiple_of(2) {
        Err(ErasureError::OddPayload(params.cell_payload_bytes))
    } else {
        Ok(())
    }
}

/// Lagrange coefficients mapping values at `known` points to the value at
/// `target`, as discrete logs (`None` for a zero coefficient).
fn interpolation_row(known: &[usize], weights: &[u16], target: usize) -> Vec<Option<u16>> {
    let t = gf16::point(target);
    // l(t) = prod (t - x_j); coefficient_i = l(t) * w_i / (t - x_i)
    let mut l = 1u16;
    for &x in known {
        l = gf16::mul(l, gf16::add(t, gf16::point(x)));
    }
    known
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let diff = gf16::add(t, gf16::point(x));
            let c = gf16::div(gf16::mul(l, w), diff);
            (c != 0).then(|| gf16::log(c))
        })
        .collect()
}

/// Barycentric weights `w_i = 1 / prod_{j != i} (x_i - x_j)`.
fn barycentric_weights(known: &[usize]) -> Vec<u16> {
    known
        .iter()
        .map(|&xi| {
            let mut d = 1u16;
            for &xj in known {
                if xj != xi {
                    d = gf16::mul(d, gf16::add(gf16::point(xi), gf16::point(xj)));
                }
            }
            gf16::inv(d)
        })
        .collect()
}

/// Systematic encoder for one line length.
#[derive(Debug, Clone)]
pub struct LineEncoder {
    k: usize,
    n: usize,
    // parity row t-k, coefficient per data position
    coefs: Vec<Vec<Option<u16>>>,
}

impl LineEncoder {
    pub fn new(params: &GridParams) -> Self {
        let known: Vec<usize> = (0..params.k).collect();
        let weights = barycentric_weights(&known);
        let coefs = (params.k..params.n)
            .map(|t| interpolation_row(&known, &weights, t))
            .collect();
        Self {
            k: params.k,
            n: params.n,
            coefs,
        }
    }

    /// Extends `k` symbol vectors to `n`.
    fn encode(&self, data: &[Vec<u16>]) -> Vec<Vec<u16>> {
        debug_assert_eq!(data.len(), self.k);
        let width = data.first().map_or(0, Vec::len);
        let mut out: Vec<Vec<u16>> = data.to_vec();
        out.reserve(self.n - self.k);
        for row in &self.coefs {
            let mut acc = vec![0u16; width];
            for (src, coef) in data.iter().zip(row) {
                if let Some(c) = coef {
                    gf16::mul_acc_log(&mut acc, src, *c);
                }
            }
            out.push(acc);
        }
        out
    }

    /// Extends `k` payloads to a full line of `n`.
    pub fn encode_line(&self, data: &[&[u8]]) -> Vec<Vec<u8>> {
        let symbols: Vec<Vec<u16>> = data.iter().map(|d| to_symbols(d)).collect();
        self.encode(&symbols).iter().map(|s| from_symbols(s)).collect()
    }
}

/// Extends a row-major `k × k` payload matrix to row-major `n × n` payloads.
pub fn extend_payloads(
    original: &[Vec<u8>],
    params: &GridParams,
    order: ExtensionOrder,
) -> Result<Vec<Vec<u8>>, ErasureError> {
    check_payload_size(params)?;
    let (k, n) = (params.k, params.n);
    if original.len() != k * k {
        return Err(ErasureError::DimensionMismatch {
            expected: k * k,
            got: original.len(),
        });
    }
    if let Some(bad) = original.iter().find(|p| p.len() != params.cell_payload_bytes) {
        return Err(ErasureError::PayloadLength {
            expected: params.cell_payload_bytes,
            got: bad.len(),
        });
    }
    let enc = LineEncoder::new(params);
    let width = params.cell_payload_bytes / 2;
    let mut grid: Vec<Vec<u16>> = vec![Vec::new(); n * n];
    for r in 0..k {
        for c in 0..k {
            grid[r * n + c] = to_symbols(&original[r * k + c]);
        }
    }
    // first pass over the k original lines of one orientation, second pass
    // over all n lines of the other
    let (first, second) = match order {
        ExtensionOrder::RowsFirst => (LineKind::Row, LineKind::Column),
        ExtensionOrder::ColumnsFirst => (LineKind::Column, LineKind::Row),
    };
    let at = |kind: LineKind, line: usize, pos: usize| match kind {
        LineKind::Row => line * n + pos,
        LineKind::Column => pos * n + line,
    };
    for (kind, lines) in [(first, k), (second, n)] {
        for line in 0..lines {
            let data: Vec<Vec<u16>> = (0..k).map(|p| grid[at(kind, line, p)].clone()).collect();
            debug_assert!(data.iter().all(|d| d.len() == width));
            for (p, sym) in enc.encode(&data).into_iter().enumerate().skip(k) {
                grid[at(kind, line, p)] = sym;
            }
        }
    }
    Ok(grid.iter().map(|s| from_symbols(s)).collect())
}

/// Extends the original blob and seals every cell with its proof.
pub fn extend_blob(
    original: &[Vec<u8>],
    params: &GridParams,
    blob: BlobId,
) -> Result<ExtendedBlobMatrix, ErasureError> {
    let payloads = extend_payloads(original, params, ExtensionOrder::RowsFirst)?;
    let cells = payloads
        .into_iter()
        .enumerate()
        .map(|(flat, payload)| Cell::sealed(&blob, CellIndex::from_flat(flat, params.n), payload, params))
        .collect();
    Ok(ExtendedBlobMatrix::from_cells(*params, blob, cells)?)
}

/// Recovers the full line from at least `k` shares.
///
/// The first `k` shares (by position) determine the codeword; any further
/// shares are checked against it.
pub fn reconstruct_line(partial: &LineCodeword, params: &GridParams) -> Result<Vec<Vec<u8>>, ErasureError> {
    check_payload_size(params)?;
    let (k, n) = (params.k, params.n);
    let line = partial.line;
    if partial.shares.len() < k {
        return Err(ErasureError::InsufficientShares {
            line,
            have: partial.shares.len(),
            need: k,
        });
    }
    for (&pos, payload) in &partial.shares {
        if pos as usize >= n {
            return Err(ErasureError::PositionOutOfRange {
                position: pos as usize,
                n,
            });
        }
        if payload.len() != params.cell_payload_bytes {
            return Err(ErasureError::PayloadLength {
                expected: params.cell_payload_bytes,
                got: payload.len(),
            });
        }
    }
    let basis: Vec<(usize, Vec<u16>)> = partial
        .shares
        .iter()
        .take(k)
        .map(|(&p, v)| (p as usize, to_symbols(v)))
        .collect();
    let known: Vec<usize> = basis.iter().map(|(p, _)| *p).collect();
    let weights = barycentric_weights(&known);
    let width = params.cell_payload_bytes / 2;

    let mut out: Vec<Vec<u16>> = vec![Vec::new(); n];
    let mut filled = vec![false; n];
    for (p, sym) in &basis {
        out[*p] = sym.clone();
        filled[*p] = true;
    }
    for (target, slot) in out.iter_mut().enumerate() {
        if filled[target] {
            continue;
        }
        let row = interpolation_row(&known, &weights, target);
        let mut acc = vec![0u16; width];
        for ((_, src), coef) in basis.iter().zip(&row) {
            if let Some(c) = coef {
                gf16::mul_acc_log(&mut acc, src, *c);
            }
        }
        *slot = acc;
    }
    let out: Vec<Vec<u8>> = out.iter().map(|s| from_symbols(s)).collect();
    for (&pos, payload) in partial.shares.iter().skip(k) {
        if &out[pos as usize] != payload {
            return Err(ErasureError::InconsistentShares { line });
        }
    }
    Ok(out)
}

/// Greedy line closure: starting from `available`, repeatedly completes any
/// line holding at least `k` cells. Returns the closed set as a dense
/// row-major mask.
pub fn closure<I>(available: I, params: &GridParams) -> Vec<bool>
where
    I: IntoIterator<Item = CellIndex>,
{
    let (k, n) = (params.k, params.n);
    let mut held = vec![false; n * n];
    let mut counts = vec![0usize; 2 * n];
    for c in available {
        let f = c.flat(n);
        if !held[f] {
            held[f] = true;
            counts[c.row as usize] += 1;
            counts[n + c.col as usize] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..2 * n).filter(|&s| counts[s] >= k && counts[s] < n).collect();
    while let Some(slot) = queue.pop() {
        if counts[slot] >= n {
            continue;
        }
        let line = LineId::from_slot(slot, n);
        for p in 0..n as u16 {
            let c = line.cell_at(p);
            let f = c.flat(n);
            if held[f] {
                continue;
            }
            held[f] = true;
            for s in [c.row as usize, n + c.col as usize] {
                counts[s] += 1;
                if counts[s] == k && k < n {
                    queue.push(s);
                }
            }
        }
    }
    held
}

/// Whether iterated row/column decoding from `available` reaches the full
/// matrix.
pub fn reconstructable<I>(available: I, params: &GridParams) -> bool
where
    I: IntoIterator<Item = CellIndex>,
{
    closure(available, params).into_iter().all(|h| h)
}

/// Concretely decodes the full payload matrix from a partial one by
/// iterated line reconstruction.
pub fn recover_matrix(
    available: &BTreeMap<CellIndex, Vec<u8>>,
    params: &GridParams,
) -> Result<Vec<Vec<u8>>, ErasureError> {
    let n = params.n;
    let mut grid: Vec<Option<Vec<u8>>> = vec![None; n * n];
    for (c, p) in available {
        params.check_cell(*c)?;
        grid[c.flat(n)] = Some(p.clone());
    }
    loop {
        let mut progressed = false;
        for slot in 0..2 * n {
            let line = LineId::from_slot(slot, n);
            let mut partial = LineCodeword::new(line);
            for p in 0..n as u16 {
                if let Some(v) = &grid[line.cell_at(p).flat(n)] {
                    partial.insert(p, v.clone());
                }
            }
            if partial.shares.len() >= params.k && partial.shares.len() < n {
                let full = reconstruct_line(&partial, params)?;
                for (p, v) in full.into_iter().enumerate() {
                    grid[line.cell_at(p as u16).flat(n)] = Some(v);
                }
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    grid.into_iter()
        .map(|c| c.ok_or(ErasureError::NotReconstructable))
        .collect()
}
