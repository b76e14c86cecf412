//! Deterministic per-epoch custody assignment.
//!
//! Every node can compute the rows and columns any other node must hold
//! from its identifier and the epoch seed alone, so two nodes with
//! different views still agree on who holds what.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::grid::{CellIndex, GridParams, LineId, LineKind};

pub const DEFAULT_LINES_PER_NODE: usize = 8;
pub const SLOTS_PER_EPOCH: u64 = 32;
pub const SLOT_DURATION_MS: u64 = 12_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignmentError {
    #[error("cannot assign {per_node} distinct lines out of {n}")]
    TooManyLines { per_node: usize, n: usize },
}

/// Opaque 32-byte node identifier (hash of a public key).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub [u8; 32]);

impl NodeId {
    pub fn from_public_key(key: &[u8]) -> Self {
        Self(Sha256::digest(key).into())
    }

    /// Identifier for the `index`-th simulated node.
    pub fn synthetic(index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"synthetic-node");
        h.update(index.to_le_bytes());
        Self(h.finalize().into())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({self})")
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Epoch number and its randomness beacon output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpochSeed {
    pub epoch: u64,
    pub seed: [u8; 32],
}

impl EpochSeed {
    pub fn new(epoch: u64, seed: [u8; 32]) -> Self {
        Self { epoch, seed }
    }

    /// Epoch containing `slot`.
    pub fn epoch_of_slot(slot: u64) -> u64 {
        slot / SLOTS_PER_EPOCH
    }
}

/// Rows and columns a node holds during one epoch. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub node: NodeId,
    pub epoch: u64,
    pub rows: Vec<u16>,
    pub cols: Vec<u16>,
}

impl Assignment {
    #[inline]
    pub fn has_row(&self, row: u16) -> bool {
        self.rows.binary_search(&row).is_ok()
    }

    #[inline]
    pub fn has_col(&self, col: u16) -> bool {
        self.cols.binary_search(&col).is_ok()
    }

    #[inline]
    pub fn has_line(&self, line: LineId) -> bool {
        match line.kind {
            LineKind::Row => self.has_row(line.index),
            LineKind::Column => self.has_col(line.index),
        }
    }

    /// Whether `cell` lies on one of the assigned lines.
    #[inline]
    pub fn covers(&self, cell: CellIndex) -> bool {
        self.has_row(cell.row) || self.has_col(cell.col)
    }

    pub fn lines(&self) -> impl Iterator<Item = LineId> + '_ {
        self.rows
            .iter()
            .map(|&r| LineId::row(r))
            .chain(self.cols.iter().map(|&c| LineId::column(c)))
    }
}

fn draw_distinct(rng: &mut ChaCha20Rng, count: usize, n: usize) -> Vec<u16> {
    let mut out: Vec<u16> = Vec::with_capacity(count);
    while out.len() < count {
        let candidate = rng.gen_range(0..n) as u16;
        if !out.contains(&candidate) {
            out.push(candidate);
        }
    }
    out.sort_unstable();
    out
}

/// The custody function: `per_node` distinct rows and `per_node` distinct
/// columns for `node` in the epoch of `es`.
pub fn sigma(
    node: NodeId,
    es: &EpochSeed,
    params: &GridParams,
    per_node: usize,
) -> Result<Assignment, AssignmentError> {
    if per_node > params.n {
        return Err(AssignmentError::TooManyLines {
            per_node,
            n: params.n,
        });
    }
    let mut h = Sha256::new();
    h.update(b"custody-assignment");
    h.update(es.seed);
    h.update(es.epoch.to_le_bytes());
    h.update(node.0);
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    let rows = draw_distinct(&mut rng, per_node, params.n);
    let cols = draw_distinct(&mut rng, per_node, params.n);
    Ok(Assignment {
        node,
        epoch: es.epoch,
        rows,
        cols,
    })
}

/// All cells on the assigned rows and columns, intersections counted once.
pub fn custody_cells(a: &Assignment, params: &GridParams) -> BTreeSet<CellIndex> {
    let n = params.n as u16;
    let mut out = BTreeSet::new();
    for &r in &a.rows {
        out.extend((0..n).map(|c| CellIndex::new(r, c)));
    }
    for &c in &a.cols {
        out.extend((0..n).map(|r| CellIndex::new(r, c)));
    }
    out
}

/// A node's knowledge of the network. Views are not required to agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub owner: NodeId,
    pub members: BTreeSet<NodeId>,
}

impl View {
    pub fn new(owner: NodeId, members: impl IntoIterator<Item = NodeId>) -> Self {
        Self {
            owner,
            members: members.into_iter().collect(),
        }
    }
}

/// View members whose assignment contains `line`.
pub fn holders_of_line(
    line: LineId,
    view: &View,
    es: &EpochSeed,
    params: &GridParams,
    per_node: usize,
) -> Result<BTreeSet<NodeId>, AssignmentError> {
    let mut out = BTreeSet::new();
    for &m in &view.members {
        if sigma(m, es, params, per_node)?.has_line(line) {
            out.insert(m);
        }
    }
    Ok(out)
}

/// View members holding `cell` through its row or its column.
pub fn holders_of_cell(
    cell: CellIndex,
    view: &View,
    es: &EpochSeed,
    params: &GridParams,
    per_node: usize,
) -> Result<BTreeSet<NodeId>, AssignmentError> {
    let mut out = BTreeSet::new();
    for &m in &view.members {
        if sigma(m, es, params, per_node)?.covers(cell) {
            out.insert(m);
        }
    }
    Ok(out)
}

/// Dense index of a node inside a [`PeerTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerIdx(pub u32);

impl PeerIdx {
    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Cached assignments for a population of nodes in one epoch, with a
/// line-to-holders index.
///
/// Assignments depend only on the node identifier, so one table can be
/// shared by every node in a simulation; each node still restricts itself
/// to the members of its own view.
#[derive(Debug, Clone)]
pub struct PeerTable {
    params: GridParams,
    ids: Vec<NodeId>,
    assignments: Vec<Assignment>,
    line_holders: Vec<Vec<PeerIdx>>,
}

impl PeerTable {
    pub fn build(
        ids: Vec<NodeId>,
        es: &EpochSeed,
        params: &GridParams,
        per_node: usize,
    ) -> Result<Self, AssignmentError> {
        let assignments = ids
            .iter()
            .map(|&id| sigma(id, es, params, per_node))
            .collect::<Result<Vec<_>, _>>()?;
        let mut line_holders = vec![Vec::new(); params.line_count()];
        for (i, a) in assignments.iter().enumerate() {
            for line in a.lines() {
                line_holders[line.slot(params.n)].push(PeerIdx(i as u32));
            }
        }
        Ok(Self {
            params: *params,
            ids,
            assignments,
            line_holders,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn id(&self, p: PeerIdx) -> NodeId {
        self.ids[p.get()]
    }

    pub fn assignment(&self, p: PeerIdx) -> &Assignment {
        &self.assignments[p.get()]
    }

    /// Every node of the table holding `line`, in index order.
    pub fn line_holders(&self, line: LineId) -> &[PeerIdx] {
        &self.line_holders[line.slot(self.params.n)]
    }

    pub fn peers(&self) -> impl Iterator<Item = PeerIdx> {
        (0..self.ids.len() as u32).map(PeerIdx)
    }
}
