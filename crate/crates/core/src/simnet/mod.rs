//! Deterministic discrete-event simulation of one slot.
//!
//! Time is virtual and integer. Every random choice draws from a stream
//! derived from the master seed, so a (config, seed) pair always replays the
//! same event sequence.

pub mod config;
pub mod engine;
pub mod faults;
pub mod latency;
pub mod network;

use sha2::{Digest, Sha256};

pub use config::{LatencyConfig, ScenarioConfig, ScheduleConfig, ScheduleKind};
pub use engine::{run_slot, BuilderStats, NodeOutcome, SlotResult};
pub use latency::{synth_latency_matrix, LatencyMatrix, LatencyModel, LatencyTargets};
pub use network::{BandwidthModel, EndpointCounters, NetStats, Network};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("unknown scenario parameter `{0}`")]
    UnknownParam(String),
    #[error("latency model: {0}")]
    Latency(String),
}

/// Independent 64-bit seed for the stream `label`/`index` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
