//! Scenario configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assignment::DEFAULT_LINES_PER_NODE;
use crate::availability::{min_samples_for, DEFAULT_SAMPLES};
use crate::grid::{GridParams, DEFAULT_CELL_PAYLOAD_BYTES, DEFAULT_K, DEFAULT_PROOF_BYTES};
use crate::protocol::node::{DEFAULT_DEADLINE_MS, DEFAULT_TRIGGER_DELAY_MS};
use crate::protocol::schedule::{constant_schedule, default_schedule, FetchSchedule};
use crate::protocol::seeding::{PolicyKind, SeedingPolicy, DEFAULT_REDUNDANCY_K};

use super::latency::LatencyTargets;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Adaptive,
    Constant,
}

/// Fetch schedule selection with optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeouts_ms: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cb_boost: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Adaptive,
            timeouts_ms: None,
            redundancy: None,
            cb_boost: None,
            max_rounds: None,
        }
    }
}

impl ScheduleConfig {
    pub fn resolve(&self) -> FetchSchedule {
        let mut s = match self.kind {
            ScheduleKind::Adaptive => default_schedule(),
            ScheduleKind::Constant => constant_schedule(),
        };
        if let Some(t) = &self.timeouts_ms {
            s.timeouts_ms = t.clone();
        }
        if let Some(r) = &self.redundancy {
            s.redundancy = r.clone();
        }
        if let Some(b) = self.cb_boost {
            s.cb_boost = b;
        }
        if let Some(m) = self.max_rounds {
            s.max_rounds = m;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub min_rtt_ms: f64,
    pub mean_rtt_ms: f64,
    pub max_rtt_ms: f64,
    /// Topology vertices for the generator; 0 means one per endpoint.
    pub vertices: usize,
    /// CSV RTT matrix used instead of the generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        let t = LatencyTargets::default();
        Self {
            min_rtt_ms: t.min_rtt_ms,
            mean_rtt_ms: t.mean_rtt_ms,
            max_rtt_ms: t.max_rtt_ms,
            vertices: 0,
            matrix_file: None,
        }
    }
}

impl LatencyConfig {
    pub fn targets(&self) -> LatencyTargets {
        LatencyTargets {
            min_rtt_ms: self.min_rtt_ms,
            mean_rtt_ms: self.mean_rtt_ms,
            max_rtt_ms: self.max_rtt_ms,
        }
    }
}

/// Full description of one simulated slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub policy: PolicyKind,
    pub redundancy_k: u32,
    /// Rows per node; each node holds as many columns.
    pub rows_per_node: usize,
    pub grid_k: usize,
    pub cell_payload_bytes: usize,
    pub proof_bytes: usize,
    /// Samples per node; 0 derives the count from `sampling_target`.
    pub samples: usize,
    pub sampling_target: f64,
    pub loss_rate: f64,
    pub node_bandwidth_mbps: f64,
    pub builder_bandwidth_mbps: f64,
    pub dead_fraction: f64,
    pub out_of_view_fraction: f64,
    pub seed: u64,
    pub slot: u64,
    pub deadline_ms: f64,
    /// Extra time after the deadline during which messages still flow.
    pub drain_ms: f64,
    pub trigger_delay_ms: f64,
    /// Builder withholds a maximal undecodable square.
    pub withhold: bool,
    /// Carry real payloads and proofs (small grids only).
    pub materialize: bool,
    pub latency: LatencyConfig,
    pub schedule: ScheduleConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            node_count: 1000,
            policy: PolicyKind::Redundant,
            redundancy_k: DEFAULT_REDUNDANCY_K,
            rows_per_node: DEFAULT_LINES_PER_NODE,
            grid_k: DEFAULT_K,
            cell_payload_bytes: DEFAULT_CELL_PAYLOAD_BYTES,
            proof_bytes: DEFAULT_PROOF_BYTES,
            samples: DEFAULT_SAMPLES,
            sampling_target: 1e-9,
            loss_rate: 0.03,
            node_bandwidth_mbps: 25.0,
            builder_bandwidth_mbps: 10_000.0,
            dead_fraction: 0.0,
            out_of_view_fraction: 0.0,
            seed: 1,
            slot: 0,
            deadline_ms: DEFAULT_DEADLINE_MS,
            drain_ms: 2000.0,
            trigger_delay_ms: DEFAULT_TRIGGER_DELAY_MS,
            withhold: false,
            materialize: false,
            latency: LatencyConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn grid(&self) -> Result<GridParams, SimError> {
        GridParams::with_cell_bytes(self.grid_k, self.cell_payload_bytes, self.proof_bytes)
            .map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn seeding_policy(&self) -> SeedingPolicy {
        match self.policy {
            PolicyKind::Minimal => SeedingPolicy::minimal(),
            PolicyKind::Single => SeedingPolicy::single(),
            PolicyKind::Redundant => SeedingPolicy::redundant(self.redundancy_k),
        }
    }

    /// Sample count per node after resolving `samples = 0`.
    pub fn sample_count(&self) -> Result<usize, SimError> {
        if self.samples > 0 {
            return Ok(self.samples);
        }
        let g = self.grid()?;
        min_samples_for(self.sampling_target, g.n, g.k).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        let g = self.grid()?;
        if self.node_count == 0 {
            return bad("node_count must be positive".into());
        }
        if self.rows_per_node == 0 || self.rows_per_node > g.n {
            return bad(format!("rows_per_node must lie in 1..={}", g.n));
        }
        if self.redundancy_k == 0 {
            return bad("redundancy_k must be at least 1".into());
        }
        for (name, v) in [
            ("loss_rate", self.loss_rate),
            ("dead_fraction", self.dead_fraction),
            ("out_of_view_fraction", self.out_of_view_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("node_bandwidth_mbps", self.node_bandwidth_mbps),
            ("builder_bandwidth_mbps", self.builder_bandwidth_mbps),
            ("deadline_ms", self.deadline_ms),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("drain_ms", self.drain_ms), ("trigger_delay_ms", self.trigger_delay_ms)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        let s = self.sample_count()?;
        if s > g.cell_count() {
            return bad(format!("{s} samples exceed the {} cells of the grid", g.cell_count()));
        }
        if self.materialize && g.cell_payload_bytes % 2 != 0 {
            return bad("materialized runs need an even cell payload size".into());
        }
        self.schedule.resolve().validate().map_err(SimError::Config)?;
        if self.latency.matrix_file.is_none() {
            let t = self.latency.targets();
            if !(t.min_rtt_ms > 0.0 && t.min_rtt_ms <= t.mean_rtt_ms && t.mean_rtt_ms <= t.max_rtt_ms) {
                return bad(format!(
                    "latency targets need 0 < min <= mean <= max, got {} / {} / {}",
                    t.min_rtt_ms, t.mean_rtt_ms, t.max_rtt_ms
                ));
            }
        }
        Ok(())
    }

    /// Returns a copy with `key` (dotted for nested tables, e.g.
    /// `latency.mean_rtt_ms`) set to `value`, parsed as a TOML value.
    pub fn with_param(&self, key: &str, value: &str) -> Result<Self, SimError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| SimError::Config(e.to_string()))?;
        let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().expect("non-empty key");
        let mut table = doc.as_table_mut().expect("config is a table");
        for p in parents {
            table = match table.get_mut(*p).and_then(|v| v.as_table_mut()) {
                Some(t) => t,
                None => return Err(SimError::UnknownParam(key.to_string())),
            };
        }
        if !table.contains_key(*last) && !optional_key(key) {
            return Err(SimError::UnknownParam(key.to_string()));
        }
        let parsed = match (table.get(*last), parsed) {
            // keep float-typed fields float when given an integer literal
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(last.to_string(), parsed);
        let cfg: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn optional_key(key: &str) -> bool {
    matches!(
        key,
        "latency.matrix_file" | "schedule.timeouts_ms" | "schedule.redundancy" | "schedule.cb_boost" | "schedule.max_rounds"
    )
}
