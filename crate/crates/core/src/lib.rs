//! Data availability sampling over direct peer-to-peer exchanges.
//!
//! The crate covers the whole path of one blob through a slot:
//!
//! - [`grid`]: cell geometry and byte accounting of the extended blob.
//! - [`erasure`]: systematic 2D Reed-Solomon extension and line recovery.
//! - [`assignment`]: the per-epoch custody function and holder lookups.
//! - [`availability`]: sampling bounds and withholding patterns.
//! - [`protocol`]: builder seeding plans, boost maps and the node state
//!   machine with its adaptive fetcher.
//! - [`simnet`]: a deterministic discrete-event network that runs one slot.
//! - [`harness`]: metrics, aggregation, CSV output and the CLI commands.
//!
//! See the `examples/` directory of this crate for one runnable program
//! per capability.

pub mod assignment;
pub mod availability;
pub mod cellset;
pub mod erasure;
pub mod grid;
pub mod harness;
pub mod protocol;
pub mod simnet;
pub mod time;

pub use assignment::{sigma, Assignment, EpochSeed, NodeId, PeerIdx, PeerTable, View};
pub use availability::{false_positive_bound, min_samples_for, SamplingParams, WithholdingPattern};
pub use grid::{BlobId, Cell, CellIndex, ExtendedBlobMatrix, GridParams, LineId, LineKind};
