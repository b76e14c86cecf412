//! Cell grid geometry, cell identities and byte-size accounting.
//!
//! The original blob is a `k × k` matrix of cells. After the two-dimensional
//! extension it becomes an `n × n` matrix with `n = 2k`; the original data
//! stays in the top-left quadrant.

use std::fmt;

use sha2::{Digest, Sha384, Sha512};

/// Errors raised by grid-level validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("grid dimension k must be in 1..=32767, got {0}")]
    InvalidDimension(usize),
    #[error("line index {index} out of range for n = {n}")]
    LineOutOfRange { index: usize, n: usize },
    #[error("cell ({row}, {col}) out of range for n = {n}")]
    CellOutOfRange { row: usize, col: usize, n: usize },
    #[error("cell {index} carries {got} payload bytes, expected {expected}")]
    PayloadLength {
        index: CellIndex,
        got: usize,
        expected: usize,
    },
    #[error("cell {index} carries {got} proof bytes, expected {expected}")]
    ProofLength {
        index: CellIndex,
        got: usize,
        expected: usize,
    },
}

pub const DEFAULT_K: usize = 256;
pub const DEFAULT_CELL_PAYLOAD_BYTES: usize = 512;
pub const DEFAULT_PROOF_BYTES: usize = 48;

/// Grid dimensions and per-cell byte sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct GridParams {
    pub k: usize,
    pub n: usize,
    pub cell_payload_bytes: usize,
    pub proof_bytes: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            n: 2 * DEFAULT_K,
            cell_payload_bytes: DEFAULT_CELL_PAYLOAD_BYTES,
            proof_bytes: DEFAULT_PROOF_BYTES,
        }
    }
}

impl GridParams {
    /// Grid with original dimension `k` and default cell sizes.
    pub fn new(k: usize) -> Result<Self, GridError> {
        Self::with_cell_bytes(k, DEFAULT_CELL_PAYLOAD_BYTES, DEFAULT_PROOF_BYTES)
    }

    pub fn with_cell_bytes(
        k: usize,
        cell_payload_bytes: usize,
        proof_bytes: usize,
    ) -> Result<Self, GridError> {
        // n = 2k must fit the u16 coordinates and the 16-bit code length.
        if k == 0 || k > 32_767 {
            return Err(GridError::InvalidDimension(k));
        }
        Ok(Self {
            k,
            n: 2 * k,
            cell_payload_bytes,
            proof_bytes,
        })
    }

    /// Bytes of one cell on the wire: payload plus proof.
    pub fn cell_bytes(&self) -> usize {
        self.cell_payload_bytes + self.proof_bytes
    }

    /// Number of cells in the extended matrix.
    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Number of distinct lines (rows plus columns).
    pub fn line_count(&self) -> usize {
        2 * self.n
    }

    pub fn check_cell(&self, index: CellIndex) -> Result<(), GridError> {
        if (index.row as usize) < self.n && (index.col as usize) < self.n {
            Ok(())
        } else {
            Err(GridError::CellOutOfRange {
                row: index.row as usize,
                col: index.col as usize,
                n: self.n,
            })
        }
    }

    pub fn check_line(&self, line: LineId) -> Result<(), GridError> {
        if (line.index as usize) < self.n {
            Ok(())
        } else {
            Err(GridError::LineOutOfRange {
                index: line.index as usize,
                n: self.n,
            })
        }
    }
}

/// Position of a cell in the extended matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub row: u16,
    pub col: u16,
}

impl CellIndex {
    pub const fn new(row: u16, col: u16) -> Self {
        Self { row, col }
    }

    /// Row-major position in a dense `n × n` array.
    #[inline]
    pub fn flat(self, n: usize) -> usize {
        self.row as usize * n + self.col as usize
    }

    #[inline]
    pub fn from_flat(flat: usize, n: usize) -> Self {
        Self {
            row: (flat / n) as u16,
            col: (flat % n) as u16,
        }
    }

    pub fn row_line(self) -> LineId {
        LineId::row(self.row)
    }

    pub fn col_line(self) -> LineId {
        LineId::column(self.col)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LineKind {
    Row,
    Column,
}

/// A full row or column of the extended matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineId {
    pub kind: LineKind,
    pub index: u16,
}

impl LineId {
    pub const fn row(index: u16) -> Self {
        Self {
            kind: LineKind::Row,
            index,
        }
    }

    pub const fn column(index: u16) -> Self {
        Self {
            kind: LineKind::Column,
            index,
        }
    }

    /// Dense slot in `[0, 2n)`: rows first, then columns.
    #[inline]
    pub fn slot(self, n: usize) -> usize {
        match self.kind {
            LineKind::Row => self.index as usize,
            LineKind::Column => n + self.index as usize,
        }
    }

    #[inline]
    pub fn from_slot(slot: usize, n: usize) -> Self {
        if slot < n {
            Self::row(slot as u16)
        } else {
            Self::column((slot - n) as u16)
        }
    }

    /// The cell at `position` along this line.
    #[inline]
    pub fn cell_at(self, position: u16) -> CellIndex {
        match self.kind {
            LineKind::Row => CellIndex::new(self.index, position),
            LineKind::Column => CellIndex::new(position, self.index),
        }
    }

    /// Position of `cell` along this line, if the cell lies on it.
    #[inline]
    pub fn position_of(self, cell: CellIndex) -> Option<u16> {
        match self.kind {
            LineKind::Row if cell.row == self.index => Some(cell.col),
            LineKind::Column if cell.col == self.index => Some(cell.row),
            _ => None,
        }
    }

    pub fn contains(self, cell: CellIndex) -> bool {
        self.position_of(cell).is_some()
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LineKind::Row => write!(f, "row {}", self.index),
            LineKind::Column => write!(f, "col {}", self.index),
        }
    }
}

/// The cells of `line` ordered by the varying coordinate.
pub fn line_cells(line: LineId, params: &GridParams) -> Result<Vec<CellIndex>, GridError> {
    params.check_line(line)?;
    Ok((0..params.n as u16).map(|p| line.cell_at(p)).collect())
}

/// Size of the extended blob including proofs: `n² · (payload + proof)`.
pub fn extended_blob_bytes(params: &GridParams) -> u64 {
    (params.n as u64) * (params.n as u64) * params.cell_bytes() as u64
}

/// Identifier binding cells to one blob (stands in for the commitment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlobId(pub [u8; 32]);

/// One cell: payload plus its proof placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub index: CellIndex,
    pub payload: Vec<u8>,
    pub proof: Vec<u8>,
}

impl Cell {
    /// Builds a cell and fills in the proof placeholder.
    pub fn sealed(blob: &BlobId, index: CellIndex, payload: Vec<u8>, params: &GridParams) -> Self {
        let proof = cell_proof(blob, index, &payload, params.proof_bytes);
        Self {
            index,
            payload,
            proof,
        }
    }

    pub fn check_shape(&self, params: &GridParams) -> Result<(), GridError> {
        params.check_cell(self.index)?;
        if self.payload.len() != params.cell_payload_bytes {
            return Err(GridError::PayloadLength {
                index: self.index,
                got: self.payload.len(),
                expected: params.cell_payload_bytes,
            });
        }
        if self.proof.len() != params.proof_bytes {
            return Err(GridError::ProofLength {
                index: self.index,
                got: self.proof.len(),
                expected: params.proof_bytes,
            });
        }
        Ok(())
    }

    /// Recomputes the placeholder proof and compares.
    pub fn verify(&self, blob: &BlobId, params: &GridParams) -> bool {
        self.check_shape(params).is_ok()
            && cell_proof(blob, self.index, &self.payload, params.proof_bytes) == self.proof
    }
}

/// Hash of `(blob, index, payload)` sized to `proof_bytes`.
///
/// SHA-384 gives exactly the default 48 bytes; other sizes use SHA-512 in
/// counter mode, truncated.
pub fn cell_proof(blob: &BlobId, index: CellIndex, payload: &[u8], proof_bytes: usize) -> Vec<u8> {
    if proof_bytes == 48 {
        let mut h = Sha384::new();
        h.update(blob.0);
        h.update(index.row.to_le_bytes());
        h.update(index.col.to_le_bytes());
        h.update(payload);
        return h.finalize().to_vec();
    }
    let mut out = Vec::with_capacity(proof_bytes);
    let mut counter = 0u32;
    while out.len() < proof_bytes {
        let mut h = Sha512::new();
        h.update(counter.to_le_bytes());
        h.update(blob.0);
        h.update(index.row.to_le_bytes());
        h.update(index.col.to_le_bytes());
        h.update(payload);
        let block = h.finalize();
        let take = (proof_bytes - out.len()).min(block.len());
        out.extend_from_slice(&block[..take]);
        counter += 1;
    }
    out
}

/// The dense `n × n` extended matrix held by the builder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedBlobMatrix {
    params: GridParams,
    blob: BlobId,
    cells: Vec<Cell>,
}

impl ExtendedBlobMatrix {
    /// Wraps row-major cells; each must match the params and its position.
    pub fn from_cells(params: GridParams, blob: BlobId, cells: Vec<Cell>) -> Result<Self, GridError> {
        assert_eq!(cells.len(), params.cell_count(), "dense matrix expected");
        for (flat, cell) in cells.iter().enumerate() {
            cell.check_shape(&params)?;
            debug_assert_eq!(cell.index, CellIndex::from_flat(flat, params.n));
        }
        Ok(Self {
            params,
            blob,
            cells,
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn blob_id(&self) -> &BlobId {
        &self.blob
    }

    pub fn cell(&self, index: CellIndex) -> &Cell {
        &self.cells[index.flat(self.params.n)]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Payloads of one line in position order.
    pub fn line_payloads(&self, line: LineId) -> Vec<&[u8]> {
        (0..self.params.n as u16)
            .map(|p| self.cell(line.cell_at(p)).payload.as_slice())
            .collect()
    }
}
