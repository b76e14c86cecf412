use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::grid::{BlobId, Cell, CellIndex, GridParams};

use super::seeding::BoostIndex;

pub const HEADER_BYTES: usize = 8;
pub const CELL_ID_BYTES: usize = 8;
pub const SIGNATURE_BYTES: usize = 96;
pub const BOOST_ENTRY_BYTES: usize = 8;

/// Opaque stand-in for the builder's signature over a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BuilderToken(pub [u8; 32]);

impl BuilderToken {
    pub fn derive(builder_secret: u64, slot: u64, blob: &BlobId) -> Self {
        let mut h = Sha256::new();
        h.update(b"builder-token");
        h.update(builder_secret.to_le_bytes());
        h.update(slot.to_le_bytes());
        h.update(blob.0);
        BuilderToken(h.finalize().into())
    }
}

/// Cells carried by a message. Simulations at full scale move indices
/// only; small runs can carry real payloads and proofs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellBundle {
    Ids(Vec<CellIndex>),
    Cells(Vec<Cell>),
}

impl CellBundle {
    pub fn len(&self) -> usize {
        match self {
            CellBundle::Ids(v) => v.len(),
            CellBundle::Cells(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> Vec<CellIndex> {
        match self {
            CellBundle::Ids(v) => v.clone(),
            CellBundle::Cells(v) => v.iter().map(|c| c.index).collect(),
        }
    }
}

/// Boost information attached to a seed message. The index is shared by
/// every recipient; `entries` is the number of (node, cell-range) pairs
/// relevant to this recipient and only drives byte accounting.
#[derive(Debug, Clone)]
pub struct BoostAttachment {
    pub index: Arc<BoostIndex>,
    pub entries: usize,
}

#[derive(Debug, Clone)]
pub struct SeedMessage {
    pub slot: u64,
    pub builder_sig: BuilderToken,
    pub cells: CellBundle,
    pub boost: Option<BoostAttachment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FetchTask {
    Consolidation,
    Sampling,
}

/// Identifies the fetch round that issued a query; echoed in replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueryTag {
    pub task: FetchTask,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub slot: u64,
    pub tag: QueryTag,
    pub cells: Vec<CellIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub slot: u64,
    pub tag: QueryTag,
    pub cells: CellBundle,
}

#[derive(Debug, Clone)]
pub enum Message {
    Seed(SeedMessage),
    Query(Query),
    Reply(Reply),
}

impl Message {
    /// Simulated size on the wire.
    pub fn wire_bytes(&self, params: &GridParams) -> usize {
        match self {
            Message::Seed(m) => {
                HEADER_BYTES
                    + SIGNATURE_BYTES
                    + m.cells.len() * params.cell_bytes()
                    + m.boost.as_ref().map_or(0, |b| b.entries * BOOST_ENTRY_BYTES)
            }
            Message::Query(q) => HEADER_BYTES + q.cells.len() * CELL_ID_BYTES,
            Message::Reply(r) => HEADER_BYTES + r.cells.len() * params.cell_bytes(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Seed(_) => "seed",
            Message::Query(_) => "query",
            Message::Reply(_) => "reply",
        }
    }
}
