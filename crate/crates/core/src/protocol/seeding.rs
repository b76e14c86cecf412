//! Builder-side seeding plans and consolidation boost maps.
//!
//! Every published cell is routed through exactly one of its two lines:
//! cell `(r, c)` goes through its row when `r` and `c` fall on the same
//! side of `k`, otherwise through its column. Each line then carries `k`
//! contiguous cells, and the union over all lines is the full matrix once.
//! The minimal policy keeps only the original `k × k` quadrant, routed
//! through rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{PeerIdx, PeerTable};
use crate::availability::WithholdingPattern;
use crate::grid::{CellIndex, GridParams, LineId, LineKind};

pub const DEFAULT_REDUNDANCY_K: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Minimal,
    Single,
    Redundant,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Minimal => "minimal",
            PolicyKind::Single => "single",
            PolicyKind::Redundant => "redundant",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "minimal" => Ok(PolicyKind::Minimal),
            "single" => Ok(PolicyKind::Single),
            "redundant" => Ok(PolicyKind::Redundant),
            other => Err(format!("unknown seeding policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedingPolicy {
    pub kind: PolicyKind,
    /// Distinct recipients per parcel; only used by [`PolicyKind::Redundant`].
    pub redundancy_k: u32,
}

impl SeedingPolicy {
    pub fn minimal() -> Self {
        Self {
            kind: PolicyKind::Minimal,
            redundancy_k: 1,
        }
    }

    pub fn single() -> Self {
        Self {
            kind: PolicyKind::Single,
            redundancy_k: 1,
        }
    }

    pub fn redundant(k: u32) -> Self {
        Self {
            kind: PolicyKind::Redundant,
            redundancy_k: k.max(1),
        }
    }

    pub fn copies(&self) -> u32 {
        match self.kind {
            PolicyKind::Redundant => self.redundancy_k.max(1),
            _ => 1,
        }
    }

    fn recipient_cap(&self, params: &GridParams) -> usize {
        match self.kind {
            PolicyKind::Minimal => params.k,
            _ => params.n,
        }
    }

    /// Payload bytes the builder uploads when every line has enough holders.
    pub fn budget_bytes(&self, params: &GridParams) -> u64 {
        let cells = match self.kind {
            PolicyKind::Minimal => params.k * params.k,
            _ => params.n * params.n,
        } as u64;
        cells * self.copies() as u64 * params.cell_bytes() as u64
    }
}

impl Default for SeedingPolicy {
    fn default() -> Self {
        Self::redundant(DEFAULT_REDUNDANCY_K)
    }
}

/// Cells seeded through `line` under `kind`, in line order.
pub fn routed_cells(line: LineId, params: &GridParams, kind: PolicyKind) -> Vec<CellIndex> {
    let k = params.k as u16;
    let n = params.n as u16;
    let low = line.index < k;
    let positions = match (kind, line.kind) {
        (PolicyKind::Minimal, LineKind::Row) if low => 0..k,
        (PolicyKind::Minimal, _) => 0..0,
        (_, LineKind::Row) if low => 0..k,
        (_, LineKind::Row) => k..n,
        (_, LineKind::Column) if low => k..n,
        (_, LineKind::Column) => 0..k,
    };
    positions.map(|p| line.cell_at(p)).collect()
}

/// A contiguous run of routed cells of one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parcel {
    pub line: LineId,
    pub cells: Vec<CellIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub recipient: PeerIdx,
    pub parcel: u32,
    /// 0 for the primary copy of a parcel, then 1, 2, ... for redundant ones.
    pub copy: u32,
}

/// Everything the builder sends to one recipient at one copy level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedBatch {
    pub recipient: PeerIdx,
    pub level: u32,
    pub cells: Vec<CellIndex>,
}

#[derive(Debug, Clone)]
pub struct SeedingPlan {
    pub policy: SeedingPolicy,
    pub params: GridParams,
    pub parcels: Vec<Parcel>,
    pub deliveries: Vec<Delivery>,
    /// Cells that should have been seeded but whose line had no holder in
    /// the builder's view.
    pub unseeded: Vec<CellIndex>,
}

impl SeedingPlan {
    pub fn payload_bytes(&self) -> u64 {
        let cells: usize = self
            .deliveries
            .iter()
            .map(|d| self.parcels[d.parcel as usize].cells.len())
            .sum();
        cells as u64 * self.params.cell_bytes() as u64
    }

    pub fn recipients(&self) -> BTreeSet<PeerIdx> {
        self.deliveries.iter().map(|d| d.recipient).collect()
    }

    /// All cells seeded to `recipient`, sorted.
    pub fn cells_for(&self, recipient: PeerIdx) -> Vec<CellIndex> {
        let mut out: Vec<CellIndex> = self
            .deliveries
            .iter()
            .filter(|d| d.recipient == recipient)
            .flat_map(|d| self.parcels[d.parcel as usize].cells.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Groups deliveries into one batch per (copy level, recipient). Levels
    /// go out in order; recipients are shuffled within each level.
    pub fn batches<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<SeedBatch> {
        let mut levels: BTreeMap<u32, BTreeMap<PeerIdx, Vec<CellIndex>>> = BTreeMap::new();
        for d in &self.deliveries {
            levels
                .entry(d.copy)
                .or_default()
                .entry(d.recipient)
                .or_default()
                .extend_from_slice(&self.parcels[d.parcel as usize].cells);
        }
        let mut out = Vec::with_capacity(self.deliveries.len());
        for (level, per_recipient) in levels {
            let mut batch: Vec<SeedBatch> = per_recipient
                .into_iter()
                .map(|(recipient, cells)| SeedBatch { recipient, level, cells })
                .collect();
            batch.shuffle(rng);
            out.extend(batch);
        }
        out
    }
}

/// Splits each line's routed cells into contiguous parcels over a random
/// permutation of the line's holders in `view`.
pub fn plan_seeding<R: Rng + ?Sized>(
    policy: SeedingPolicy,
    table: &PeerTable,
    view: &[PeerIdx],
    withheld: Option<&WithholdingPattern>,
    rng: &mut R,
) -> SeedingPlan {
    let params = *table.params();
    let mut in_view = vec![false; table.len()];
    for p in view {
        in_view[p.get()] = true;
    }
    let cap = policy.recipient_cap(&params);
    let copies = policy.copies() as usize;
    let mut plan = SeedingPlan {
        policy,
        params,
        parcels: Vec::new(),
        deliveries: Vec::new(),
        unseeded: Vec::new(),
    };
    for slot in 0..params.line_count() {
        let line = LineId::from_slot(slot, params.n);
        let mut cells = routed_cells(line, &params, policy.kind);
        if let Some(w) = withheld {
            cells.retain(|c| !w.contains(*c));
        }
        if cells.is_empty() {
            continue;
        }
        let mut holders: Vec<PeerIdx> = table
            .line_holders(line)
            .iter()
            .copied()
            .filter(|p| in_view[p.get()])
            .collect();
        if holders.is_empty() {
            plan.unseeded.extend(cells);
            continue;
        }
        holders.shuffle(rng);
        let parts = holders.len().min(cells.len()).min(cap);
        let size = cells.len().div_ceil(parts);
        for (j, chunk) in cells.chunks(size).enumerate() {
            let parcel = plan.parcels.len() as u32;
            plan.parcels.push(Parcel {
                line,
                cells: chunk.to_vec(),
            });
            let primary = holders[j];
            plan.deliveries.push(Delivery {
                recipient: primary,
                parcel,
                copy: 0,
            });
            if copies > 1 {
                let others: Vec<PeerIdx> = holders.iter().copied().filter(|&h| h != primary).collect();
                let extra = (copies - 1).min(others.len());
                for (c, &r) in others.choose_multiple(rng, extra).enumerate() {
                    plan.deliveries.push(Delivery {
                        recipient: r,
                        parcel,
                        copy: c as u32 + 1,
                    });
                }
            }
        }
    }
    plan
}

/// Cells of one line seeded to one holder of that line in one copy level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoostEntry {
    pub peer: PeerIdx,
    /// Copy level of the parcels; level 0 is sent first.
    pub copy: u32,
    pub cells: Vec<CellIndex>,
    /// Maximal runs of consecutive positions in `cells`.
    pub ranges: u32,
}

/// Shared form of every recipient's boost map: for each line, which holders
/// of that line were seeded which of its cells.
#[derive(Debug, Clone, Default)]
pub struct BoostIndex {
    n: usize,
    per_line: Vec<Vec<BoostEntry>>,
}

impl BoostIndex {
    pub fn build(plan: &SeedingPlan, table: &PeerTable) -> Self {
        let n = plan.params.n;
        let mut acc: Vec<BTreeMap<(PeerIdx, u32), Vec<CellIndex>>> = vec![BTreeMap::new(); 2 * n];
        for d in &plan.deliveries {
            let a = table.assignment(d.recipient);
            for &cell in &plan.parcels[d.parcel as usize].cells {
                if a.has_row(cell.row) {
                    acc[cell.row as usize].entry((d.recipient, d.copy)).or_default().push(cell);
                }
                if a.has_col(cell.col) {
                    acc[n + cell.col as usize].entry((d.recipient, d.copy)).or_default().push(cell);
                }
            }
        }
        let per_line = acc
            .into_iter()
            .enumerate()
            .map(|(slot, m)| {
                let line = LineId::from_slot(slot, n);
                m.into_iter()
                    .map(|((peer, copy), mut cells)| {
                        cells.sort_unstable_by_key(|c| line.position_of(*c));
                        cells.dedup();
                        let ranges = count_runs(line, &cells);
                        BoostEntry { peer, copy, cells, ranges }
                    })
                    .collect()
            })
            .collect();
        Self { n, per_line }
    }

    pub fn line_entries(&self, line: LineId) -> &[BoostEntry] {
        self.per_line.get(line.slot(self.n)).map_or(&[], |v| v.as_slice())
    }

    /// Number of (node, cell-range) entries in the map of `recipient`.
    pub fn entry_count_for(&self, recipient: PeerIdx, table: &PeerTable) -> usize {
        table
            .assignment(recipient)
            .lines()
            .flat_map(|line| self.line_entries(line))
            .filter(|e| e.peer != recipient)
            .map(|e| e.ranges as usize)
            .sum()
    }

    pub fn map_for(&self, recipient: PeerIdx, table: &PeerTable) -> ConsolidationBoostMap {
        let mut entries: BTreeMap<PeerIdx, BTreeSet<CellIndex>> = BTreeMap::new();
        for line in table.assignment(recipient).lines() {
            for e in self.line_entries(line).iter().filter(|e| e.peer != recipient) {
                entries.entry(e.peer).or_default().extend(e.cells.iter().copied());
            }
        }
        ConsolidationBoostMap { entries }
    }
}

fn count_runs(line: LineId, cells: &[CellIndex]) -> u32 {
    let mut runs = 0;
    let mut prev: Option<u16> = None;
    for c in cells {
        let p = line.position_of(*c).expect("cell lies on line");
        if prev.is_none_or(|q| q + 1 != p) {
            runs += 1;
        }
        prev = Some(p);
    }
    runs
}

/// Which peers the builder seeded with which cells of the recipient's lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConsolidationBoostMap {
    pub entries: BTreeMap<PeerIdx, BTreeSet<CellIndex>>,
}

impl ConsolidationBoostMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Boost map of every recipient in `plan`.
pub fn build_boost_maps(plan: &SeedingPlan, table: &PeerTable) -> BTreeMap<PeerIdx, ConsolidationBoostMap> {
    let index = BoostIndex::build(plan, table);
    plan.recipients()
        .into_iter()
        .map(|r| (r, index.map_for(r, table)))
        .collect()
}
