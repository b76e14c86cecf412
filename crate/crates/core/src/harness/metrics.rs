//! Per-node metric rows, aggregation and CSV encoding.
//!
//! Times are milliseconds since slot start. A phase the node never finished
//! is an empty CSV field; it is left out of percentiles but still counts in
//! the success denominator.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::protocol::fetch::RoundStats;
use crate::protocol::node::Verdict;
use crate::simnet::{ScenarioConfig, SlotResult};
use crate::time::SimTime;

use super::HarnessError;

/// One node's slot, flattened for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub slot: u64,
    pub seed: u64,
    pub node: usize,
    pub dead: bool,
    pub time_to_seeding_ms: Option<f64>,
    pub fetch_started_ms: Option<f64>,
    pub time_to_consolidation_ms: Option<f64>,
    pub time_to_sampling_ms: Option<f64>,
    pub verdict: Verdict,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub queries_sent: u64,
    pub cells_requested: u64,
    pub replies_sent: u64,
    pub seed_cells: u64,
    pub duplicates: u64,
    pub reconstructed: u64,
    pub consolidation_target: usize,
    pub sampling_target: usize,
    pub consolidation_rounds: usize,
    pub sampling_rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Consolidation,
    Sampling,
}

/// One fetch round of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRow {
    pub node: usize,
    pub task: Task,
    pub round: u32,
    pub missing_at_start: u64,
    pub queries: u64,
    pub cells_requested: u64,
    pub replies_in_round: u64,
    pub replies_after_round: u64,
    pub cells_in_round: u64,
    pub cells_after_round: u64,
    pub duplicates: u64,
    pub missing_at_end: u64,
}

impl RoundRow {
    fn new(node: usize, task: Task, s: &RoundStats) -> Self {
        Self {
            node,
            task,
            round: s.round,
            missing_at_start: s.missing_at_start,
            queries: s.queries,
            cells_requested: s.cells_requested,
            replies_in_round: s.replies_in_round,
            replies_after_round: s.replies_after_round,
            cells_in_round: s.cells_in_round,
            cells_after_round: s.cells_after_round,
            duplicates: s.duplicates,
            missing_at_end: s.missing_at_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentiles {
    pub completed: usize,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub p99: Option<f64>,
    pub max: Option<f64>,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            completed: v.len(),
            p50: nearest_rank(&v, 0.50),
            p90: nearest_rank(&v, 0.90),
            p99: nearest_rank(&v, 0.99),
            max: v.last().copied(),
        }
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Scenario-level summary; every field is recomputable from the node and
/// round rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub nodes: usize,
    pub live: usize,
    pub success_fraction: f64,
    pub unavailable_verdicts: usize,
    pub seeding: Percentiles,
    pub consolidation: Percentiles,
    pub sampling: Percentiles,
    pub messages_per_node: f64,
    pub queries_per_node: f64,
    pub bytes_sent_per_node: f64,
    pub duplicates_per_node: f64,
    /// Cumulative fraction of the fetch set obtained after rounds 1 to 4.
    pub coverage: [f64; 4],
}

/// Flat aggregate row as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub nodes: usize,
    pub live: usize,
    pub success_fraction: f64,
    pub unavailable_verdicts: usize,
    pub seeding_p50_ms: Option<f64>,
    pub seeding_p99_ms: Option<f64>,
    pub seeding_max_ms: Option<f64>,
    pub consolidation_p50_ms: Option<f64>,
    pub consolidation_p99_ms: Option<f64>,
    pub consolidation_max_ms: Option<f64>,
    pub sampling_completed: usize,
    pub sampling_p50_ms: Option<f64>,
    pub sampling_p90_ms: Option<f64>,
    pub sampling_p99_ms: Option<f64>,
    pub sampling_max_ms: Option<f64>,
    pub messages_per_node: f64,
    pub queries_per_node: f64,
    pub bytes_sent_per_node: f64,
    pub duplicates_per_node: f64,
    pub coverage_r1: f64,
    pub coverage_r2: f64,
    pub coverage_r3: f64,
    pub coverage_r4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub nodes: Vec<PhaseMetrics>,
    pub rounds: Vec<RoundRow>,
    pub aggregate: Aggregate,
}

impl ScenarioResult {
    pub fn from_slot(slot: &SlotResult) -> Self {
        let ms = |t: Option<SimTime>| t.map(SimTime::as_millis);
        let mut nodes = Vec::with_capacity(slot.nodes.len());
        let mut rounds = Vec::new();
        for n in &slot.nodes {
            let r = &n.report;
            nodes.push(PhaseMetrics {
                slot: slot.config.slot,
                seed: slot.seed,
                node: n.index,
                dead: n.dead,
                time_to_seeding_ms: ms(r.time_to_seeding),
                fetch_started_ms: ms(r.fetch_started),
                time_to_consolidation_ms: ms(r.time_to_consolidation),
                time_to_sampling_ms: ms(r.time_to_sampling),
                verdict: r.verdict,
                messages_sent: n.net.messages_sent,
                messages_received: n.net.messages_received,
                bytes_sent: n.net.bytes_sent,
                bytes_received: n.net.bytes_received,
                queries_sent: r.counters.queries_sent,
                cells_requested: r.counters.cells_requested,
                replies_sent: r.counters.replies_sent,
                seed_cells: r.counters.seed_cells,
                duplicates: r.counters.duplicates,
                reconstructed: r.counters.reconstructed,
                consolidation_target: r.consolidation_target,
                sampling_target: r.sampling_target,
                consolidation_rounds: r.consolidation_rounds.len(),
                sampling_rounds: r.sampling_rounds.len(),
            });
            rounds.extend(r.consolidation_rounds.iter().map(|s| RoundRow::new(n.index, Task::Consolidation, s)));
            rounds.extend(r.sampling_rounds.iter().map(|s| RoundRow::new(n.index, Task::Sampling, s)));
        }
        let aggregate = aggregate(&nodes, &rounds, slot.config.deadline_ms);
        Self {
            config: slot.config.clone(),
            seed: slot.seed,
            nodes,
            rounds,
            aggregate,
        }
    }

    pub fn aggregate_row(&self, param: &str, value: &str) -> AggregateRow {
        let a = &self.aggregate;
        AggregateRow {
            param: param.to_string(),
            value: value.to_string(),
            seed: self.seed,
            nodes: a.nodes,
            live: a.live,
            success_fraction: a.success_fraction,
            unavailable_verdicts: a.unavailable_verdicts,
            seeding_p50_ms: a.seeding.p50,
            seeding_p99_ms: a.seeding.p99,
            seeding_max_ms: a.seeding.max,
            consolidation_p50_ms: a.consolidation.p50,
            consolidation_p99_ms: a.consolidation.p99,
            consolidation_max_ms: a.consolidation.max,
            sampling_completed: a.sampling.completed,
            sampling_p50_ms: a.sampling.p50,
            sampling_p90_ms: a.sampling.p90,
            sampling_p99_ms: a.sampling.p99,
            sampling_max_ms: a.sampling.max,
            messages_per_node: a.messages_per_node,
            queries_per_node: a.queries_per_node,
            bytes_sent_per_node: a.bytes_sent_per_node,
            duplicates_per_node: a.duplicates_per_node,
            coverage_r1: a.coverage[0],
            coverage_r2: a.coverage[1],
            coverage_r3: a.coverage[2],
            coverage_r4: a.coverage[3],
        }
    }

    /// P`q` time-to-sampling over live nodes, counting unfinished nodes as
    /// infinitely late.
    pub fn sampling_tail(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self
            .nodes
            .iter()
            .filter(|n| !n.dead)
            .map(|n| n.time_to_sampling_ms.unwrap_or(f64::INFINITY))
            .collect();
        v.sort_by(f64::total_cmp);
        nearest_rank(&v, q).unwrap_or(f64::INFINITY)
    }
}

/// Recomputes the aggregate from rows.
pub fn aggregate(nodes: &[PhaseMetrics], rounds: &[RoundRow], deadline_ms: f64) -> Aggregate {
    let live: Vec<&PhaseMetrics> = nodes.iter().filter(|n| !n.dead).collect();
    let phase = |f: fn(&PhaseMetrics) -> Option<f64>| {
        let v: Vec<f64> = live.iter().filter_map(|n| f(n)).collect();
        Percentiles::of(&v)
    };
    let ok = live
        .iter()
        .filter(|n| n.time_to_sampling_ms.is_some_and(|t| t <= deadline_ms))
        .count();
    let per_node = |f: fn(&PhaseMetrics) -> u64| {
        if live.is_empty() {
            0.0
        } else {
            live.iter().map(|n| f(n)).sum::<u64>() as f64 / live.len() as f64
        }
    };
    Aggregate {
        nodes: nodes.len(),
        live: live.len(),
        success_fraction: if live.is_empty() { 0.0 } else { ok as f64 / live.len() as f64 },
        unavailable_verdicts: live
            .iter()
            .filter(|n| n.verdict == Verdict::Unavailable)
            .count(),
        seeding: phase(|n| n.time_to_seeding_ms),
        consolidation: phase(|n| n.time_to_consolidation_ms),
        sampling: phase(|n| n.time_to_sampling_ms),
        messages_per_node: per_node(|n| n.messages_sent),
        queries_per_node: per_node(|n| n.queries_sent),
        bytes_sent_per_node: per_node(|n| n.bytes_sent),
        duplicates_per_node: per_node(|n| n.duplicates),
        coverage: [1, 2, 3, 4].map(|r| coverage_after(nodes, rounds, r)),
    }
}

/// Mean over live nodes that fetched of the share of their initially missing
/// cells (consolidation and sampling together) obtained once round `round`
/// ended. A node whose fetch finished earlier counts its final state.
pub fn coverage_after(nodes: &[PhaseMetrics], rounds: &[RoundRow], round: u32) -> f64 {
    #[derive(Default, Clone, Copy)]
    struct Acc {
        initial: u64,
        at_round: Option<u64>,
        last: u64,
    }
    let mut acc = vec![[Acc::default(); 2]; nodes.len()];
    let pos: std::collections::HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, n)| (n.node, i)).collect();
    for r in rounds {
        let Some(&i) = pos.get(&r.node) else { continue };
        let a = &mut acc[i][r.task as usize];
        if r.round == 1 {
            a.initial = r.missing_at_start;
        }
        if r.round <= round {
            a.last = r.missing_at_end;
        }
        if r.round == round {
            a.at_round = Some(r.missing_at_end);
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (n, tasks) in nodes.iter().zip(&acc) {
        let initial: u64 = tasks.iter().map(|a| a.initial).sum();
        if n.dead || initial == 0 {
            continue;
        }
        let left: u64 = tasks.iter().map(|a| a.at_round.unwrap_or(a.last)).sum();
        sum += 1.0 - left as f64 / initial as f64;
        count += 1;
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(buf)
}
