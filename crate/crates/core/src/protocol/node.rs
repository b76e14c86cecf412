//! Per-node state machine for one slot.
//!
//! Handlers take the current time and return the actions the runner must
//! carry out: messages to send and timers to arm.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{PeerIdx, PeerTable};
use crate::availability::{sample_cells, SamplingParams};
use crate::cellset::CellSet;
use crate::erasure::{self, LineCodeword};
use crate::grid::{BlobId, Cell, CellIndex, GridParams, LineId, LineKind};
use crate::time::SimTime;

use super::fetch::{FetchContext, FetchOutcome, FetchState, RoundStats};
use super::message::{BuilderToken, CellBundle, FetchTask, Message, Query, QueryTag, Reply, SeedMessage};
use super::schedule::FetchSchedule;
use super::seeding::BoostIndex;

pub const DEFAULT_TRIGGER_DELAY_MS: f64 = 400.0;
pub const DEFAULT_DEADLINE_MS: f64 = 4000.0;

/// Slot-wide settings shared by every node.
#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub params: GridParams,
    pub slot: u64,
    pub blob: BlobId,
    pub builder_token: BuilderToken,
    pub schedule: FetchSchedule,
    pub samples: usize,
    /// Wait after a first foreign query before fetching without seed data.
    pub trigger_delay: SimTime,
    /// Fetching stops at this time after slot start.
    pub deadline: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimerKind {
    ConsolidationTrigger,
    RoundEnd(FetchTask, u32),
}

#[derive(Debug, Clone)]
pub enum Action {
    Send { to: PeerIdx, msg: Message },
    Timer { at: SimTime, kind: TimerKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Available,
    Unavailable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounters {
    pub seed_messages: u64,
    pub seed_cells: u64,
    pub rejected_seeds: u64,
    pub proof_failures: u64,
    pub duplicates: u64,
    pub reconstructed: u64,
    pub queries_sent: u64,
    pub cells_requested: u64,
    pub queries_received: u64,
    pub replies_sent: u64,
    pub cells_served: u64,
    pub replies_received: u64,
}

/// Summary of one node's slot.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub time_to_seeding: Option<SimTime>,
    pub fetch_started: Option<SimTime>,
    pub time_to_consolidation: Option<SimTime>,
    pub time_to_sampling: Option<SimTime>,
    pub verdict: Verdict,
    pub counters: NodeCounters,
    pub consolidation_target: usize,
    pub sampling_target: usize,
    pub consolidation_rounds: Vec<RoundStats>,
    pub sampling_rounds: Vec<RoundStats>,
}

#[derive(Debug, Clone)]
struct PendingQuery {
    from: PeerIdx,
    tag: QueryTag,
    cells: Vec<CellIndex>,
    remaining: usize,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    me: PeerIdx,
    cfg: Arc<NodeConfig>,
    table: Arc<PeerTable>,
    view: Vec<PeerIdx>,
    held: CellSet,
    payloads: Option<HashMap<CellIndex, Cell>>,
    seeded_at: Option<SimTime>,
    started_at: Option<SimTime>,
    trigger_pending: bool,
    boost: Option<Arc<BoostIndex>>,
    consolidation: Option<FetchState>,
    sampling: Option<FetchState>,
    samples: Vec<CellIndex>,
    pending: Vec<Option<PendingQuery>>,
    waiters: HashMap<CellIndex, Vec<usize>>,
    counters: NodeCounters,
    rng: ChaCha8Rng,
}

impl NodeState {
    /// `view` lists the peers this node knows about. With `materialize` set
    /// the node stores and verifies real payloads and decodes lines.
    pub fn new(
        me: PeerIdx,
        cfg: Arc<NodeConfig>,
        table: Arc<PeerTable>,
        view: Vec<PeerIdx>,
        rng_seed: u64,
        materialize: bool,
    ) -> Self {
        let n = cfg.params.n;
        Self {
            me,
            cfg,
            table,
            view,
            held: CellSet::new(n),
            payloads: materialize.then(HashMap::new),
            seeded_at: None,
            started_at: None,
            trigger_pending: false,
            boost: None,
            consolidation: None,
            sampling: None,
            samples: Vec::new(),
            pending: Vec::new(),
            waiters: HashMap::new(),
            counters: NodeCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn id(&self) -> PeerIdx {
        self.me
    }

    pub fn held(&self) -> &CellSet {
        &self.held
    }

    pub fn payload(&self, cell: CellIndex) -> Option<&Cell> {
        self.payloads.as_ref().and_then(|m| m.get(&cell))
    }

    pub fn samples(&self) -> &[CellIndex] {
        &self.samples
    }

    pub fn counters(&self) -> &NodeCounters {
        &self.counters
    }

    pub fn consolidation(&self) -> Option<&FetchState> {
        self.consolidation.as_ref()
    }

    pub fn sampling(&self) -> Option<&FetchState> {
        self.sampling.as_ref()
    }

    pub fn has_started(&self) -> bool {
        self.started_at.is_some()
    }

    pub fn trigger_pending(&self) -> bool {
        self.trigger_pending
    }

    /// Queries waiting for cells this node does not hold yet.
    pub fn buffered_queries(&self) -> usize {
        self.pending.iter().filter(|p| p.is_some()).count()
    }

    fn in_custody(&self, cell: CellIndex) -> bool {
        self.table.assignment(self.me).covers(cell)
    }

    pub fn on_seed_received(&mut self, msg: &SeedMessage, now: SimTime) -> Vec<Action> {
        let mut actions = Vec::new();
        if msg.slot != self.cfg.slot || msg.builder_sig != self.cfg.builder_token {
            self.counters.rejected_seeds += 1;
            return actions;
        }
        self.counters.seed_messages += 1;
        if self.seeded_at.is_none() {
            self.seeded_at = Some(now);
        }
        if self.boost.is_none() {
            if let Some(b) = &msg.boost {
                self.boost = Some(b.index.clone());
                for fs in [&mut self.consolidation, &mut self.sampling].into_iter().flatten() {
                    if fs.task() == FetchTask::Consolidation {
                        fs.set_boost_known();
                    }
                }
            }
        }
        let bundle = self.custody_only(&msg.cells);
        let (fresh, _) = self.absorb(&bundle, now, &mut actions);
        self.counters.seed_cells += fresh;
        if self.started_at.is_none() {
            self.start(now, &mut actions);
        }
        actions
    }

    fn custody_only(&self, cells: &CellBundle) -> CellBundle {
        match cells {
            CellBundle::Ids(v) => CellBundle::Ids(v.iter().copied().filter(|c| self.in_custody(*c)).collect()),
            CellBundle::Cells(v) => CellBundle::Cells(v.iter().filter(|c| self.in_custody(c.index)).cloned().collect()),
        }
    }

    pub fn on_query(&mut self, from: PeerIdx, q: &Query, now: SimTime) -> Vec<Action> {
        let mut actions = Vec::new();
        self.counters.queries_received += 1;
        if q.slot != self.cfg.slot {
            return actions;
        }
        if self.started_at.is_none() && !self.trigger_pending {
            self.trigger_pending = true;
            actions.push(Action::Timer {
                at: now + self.cfg.trigger_delay,
                kind: TimerKind::ConsolidationTrigger,
            });
        }
        let cells: Vec<CellIndex> = q
            .cells
            .iter()
            .copied()
            .filter(|&c| self.cfg.params.check_cell(c).is_ok())
            .filter(|&c| self.held.contains(c) || self.in_custody(c))
            .collect();
        if cells.is_empty() {
            return actions;
        }
        let missing = cells.iter().filter(|&&c| !self.held.contains(c)).count();
        if missing == 0 {
            self.reply(from, q.tag, &cells, &mut actions);
            return actions;
        }
        let id = self.pending.len();
        for &c in cells.iter().filter(|&&c| !self.held.contains(c)) {
            self.waiters.entry(c).or_default().push(id);
        }
        self.pending.push(Some(PendingQuery {
            from,
            tag: q.tag,
            cells,
            remaining: missing,
        }));
        actions
    }

    pub fn on_reply(&mut self, from: PeerIdx, r: &Reply, now: SimTime) -> Vec<Action> {
        let mut actions = Vec::new();
        if r.slot != self.cfg.slot {
            return actions;
        }
        self.counters.replies_received += 1;
        let in_round = self.fetch(r.tag.task).is_some_and(|fs| fs.is_current(r.tag.round));
        let (fresh, dup) = self.absorb(&r.cells, now, &mut actions);
        if let Some(fs) = self.fetch_mut(r.tag.task) {
            fs.on_reply(from, r.tag.round, in_round, fresh, dup);
        }
        actions
    }

    pub fn on_timer(&mut self, kind: TimerKind, now: SimTime) -> Vec<Action> {
        let mut actions = Vec::new();
        match kind {
            TimerKind::ConsolidationTrigger => {
                self.trigger_pending = false;
                if self.started_at.is_none() {
                    self.start(now, &mut actions);
                }
            }
            TimerKind::RoundEnd(task, round) => {
                let table = self.table.clone();
                let boost = self.boost.clone();
                let cfg = self.cfg.clone();
                let ctx = FetchContext {
                    me: self.me,
                    table: &table,
                    schedule: &cfg.schedule,
                    boost: boost.as_deref(),
                };
                let Some(fs) = self.fetch_mut(task) else {
                    return actions;
                };
                if fs.round() != round || !fs.is_running() {
                    return actions;
                }
                if fs.end_round(&ctx, now, cfg.deadline) {
                    self.next_round(task, now, &mut actions);
                }
            }
        }
        actions
    }

    /// Stops fetches still running at the end of the simulation.
    pub fn finish(&mut self, now: SimTime) {
        for fs in [&mut self.consolidation, &mut self.sampling].into_iter().flatten() {
            fs.abort(now);
        }
    }

    pub fn report(&self) -> NodeReport {
        let done = |fs: &Option<FetchState>| match fs.as_ref().map(|f| f.outcome()) {
            Some(FetchOutcome::Complete(t)) => Some(t),
            _ => None,
        };
        let time_to_sampling = done(&self.sampling);
        let verdict = match time_to_sampling {
            Some(t) if t <= self.cfg.deadline => Verdict::Available,
            _ => Verdict::Unavailable,
        };
        NodeReport {
            time_to_seeding: self.seeded_at,
            fetch_started: self.started_at,
            time_to_consolidation: done(&self.consolidation),
            time_to_sampling,
            verdict,
            counters: self.counters.clone(),
            consolidation_target: self.consolidation.as_ref().map_or(0, |f| f.initial_missing()),
            sampling_target: self.sampling.as_ref().map_or(0, |f| f.initial_missing()),
            consolidation_rounds: self.consolidation.as_ref().map_or(Vec::new(), |f| f.rounds().to_vec()),
            sampling_rounds: self.sampling.as_ref().map_or(Vec::new(), |f| f.rounds().to_vec()),
        }
    }

    fn fetch(&self, task: FetchTask) -> Option<&FetchState> {
        match task {
            FetchTask::Consolidation => self.consolidation.as_ref(),
            FetchTask::Sampling => self.sampling.as_ref(),
        }
    }

    fn fetch_mut(&mut self, task: FetchTask) -> Option<&mut FetchState> {
        match task {
            FetchTask::Consolidation => self.consolidation.as_mut(),
            FetchTask::Sampling => self.sampling.as_mut(),
        }
    }

    fn start(&mut self, now: SimTime, actions: &mut Vec<Action>) {
        self.started_at = Some(now);
        let params = self.cfg.params;
        let assignment = self.table.assignment(self.me).clone();

        let mut custody_missing = CellSet::new(params.n);
        for line in assignment.lines() {
            for c in self.held.line_gaps(line).collect::<Vec<_>>() {
                custody_missing.insert(c);
            }
        }
        self.samples = sample_cells(&mut self.rng, &SamplingParams::new(self.cfg.samples, &params));
        let sample_missing = CellSet::from_cells(params.n, self.samples.iter().copied().filter(|&c| !self.held.contains(c)));

        let mut peers: Vec<PeerIdx> = self.view.iter().copied().filter(|&p| p != self.me).collect();
        peers.shuffle(&mut self.rng);
        let mut cons = FetchState::new(FetchTask::Consolidation, custody_missing, peers.clone(), now);
        if self.boost.is_some() {
            cons.set_boost_known();
        }
        peers.shuffle(&mut self.rng);
        let samp = FetchState::new(FetchTask::Sampling, sample_missing, peers, now);
        self.consolidation = Some(cons);
        self.sampling = Some(samp);
        for task in [FetchTask::Consolidation, FetchTask::Sampling] {
            if self.fetch(task).is_some_and(|f| f.is_running()) {
                self.next_round(task, now, actions);
            }
        }
    }

    fn next_round(&mut self, task: FetchTask, now: SimTime, actions: &mut Vec<Action>) {
        let table = self.table.clone();
        let cfg = self.cfg.clone();
        // the boost map only steers consolidation
        let boost = match task {
            FetchTask::Consolidation => self.boost.clone(),
            FetchTask::Sampling => None,
        };
        let ctx = FetchContext {
            me: self.me,
            table: &table,
            schedule: &cfg.schedule,
            boost: boost.as_deref(),
        };
        let fs = self.fetch_mut(task).expect("fetch started");
        let plan = fs.plan_round(&ctx);
        let round = fs.round();
        let tag = QueryTag { task, round };
        for q in plan {
            self.counters.queries_sent += 1;
            self.counters.cells_requested += q.cells.len() as u64;
            actions.push(Action::Send {
                to: q.peer,
                msg: Message::Query(Query {
                    slot: cfg.slot,
                    tag,
                    cells: q.cells,
                }),
            });
        }
        actions.push(Action::Timer {
            at: now + cfg.schedule.timeout(round),
            kind: TimerKind::RoundEnd(task, round),
        });
    }

    fn reply(&mut self, to: PeerIdx, tag: QueryTag, cells: &[CellIndex], actions: &mut Vec<Action>) {
        let bundle = match &self.payloads {
            Some(store) => CellBundle::Cells(cells.iter().map(|c| store[c].clone()).collect()),
            None => CellBundle::Ids(cells.to_vec()),
        };
        self.counters.replies_sent += 1;
        self.counters.cells_served += cells.len() as u64;
        actions.push(Action::Send {
            to,
            msg: Message::Reply(Reply {
                slot: self.cfg.slot,
                tag,
                cells: bundle,
            }),
        });
    }

    /// Stores incoming cells, completes custody lines that reached `k`
    /// cells, and propagates the new cells to fetches and buffered queries.
    /// Returns (new cells received, duplicates).
    fn absorb(&mut self, bundle: &CellBundle, now: SimTime, actions: &mut Vec<Action>) -> (u64, u64) {
        let params = self.cfg.params;
        let mut fresh: Vec<CellIndex> = Vec::new();
        let mut dup = 0u64;
        match bundle {
            CellBundle::Ids(ids) => {
                for &c in ids {
                    if params.check_cell(c).is_err() {
                        self.counters.proof_failures += 1;
                    } else if self.held.insert(c) {
                        fresh.push(c);
                    } else {
                        dup += 1;
                    }
                }
            }
            CellBundle::Cells(cells) => {
                for cell in cells {
                    if !cell.verify(&self.cfg.blob, &params) {
                        self.counters.proof_failures += 1;
                    } else if self.held.insert(cell.index) {
                        fresh.push(cell.index);
                        if let Some(store) = self.payloads.as_mut() {
                            store.insert(cell.index, cell.clone());
                        }
                    } else {
                        dup += 1;
                    }
                }
            }
        }
        self.counters.duplicates += dup;
        let received = fresh.len() as u64;
        if fresh.is_empty() {
            return (0, dup);
        }
        let rebuilt = self.reconstruct_from(&fresh);
        self.counters.reconstructed += rebuilt.len() as u64;
        fresh.extend(rebuilt);

        for fs in [&mut self.consolidation, &mut self.sampling].into_iter().flatten() {
            fs.on_cells_held(&fresh, now);
        }
        for c in fresh {
            let Some(ids) = self.waiters.remove(&c) else {
                continue;
            };
            for id in ids {
                let ready = match self.pending[id].as_mut() {
                    Some(p) => {
                        p.remaining -= 1;
                        p.remaining == 0
                    }
                    None => false,
                };
                if ready {
                    let p = self.pending[id].take().expect("pending query");
                    self.reply(p.from, p.tag, &p.cells, actions);
                }
            }
        }
        (received, dup)
    }

    /// Completes every custody line with at least `k` held cells, cascading
    /// through crossing lines. Returns the cells added.
    fn reconstruct_from(&mut self, fresh: &[CellIndex]) -> Vec<CellIndex> {
        let params = self.cfg.params;
        let table = self.table.clone();
        let assignment = table.assignment(self.me);
        let mut queue: Vec<LineId> = Vec::new();
        let mut queued = vec![false; params.line_count()];
        let push = |line: LineId, queue: &mut Vec<LineId>, queued: &mut [bool]| {
            let slot = line.slot(params.n);
            if assignment.has_line(line) && !queued[slot] {
                queued[slot] = true;
                queue.push(line);
            }
        };
        for &c in fresh {
            push(c.row_line(), &mut queue, &mut queued);
            push(c.col_line(), &mut queue, &mut queued);
        }
        let mut added = Vec::new();
        while let Some(line) = queue.pop() {
            queued[line.slot(params.n)] = false;
            let count = self.held.line_count(line);
            if count < params.k || count == params.n {
                continue;
            }
            let gaps: Vec<CellIndex> = self.held.line_gaps(line).collect();
            if let Some(store) = self.payloads.as_mut() {
                let mut partial = LineCodeword::new(line);
                for (pos, cell) in (0..params.n as u16).map(|p| (p, line.cell_at(p))) {
                    if let Some(c) = store.get(&cell) {
                        partial.insert(pos, c.payload.clone());
                    }
                }
                let Ok(full) = erasure::reconstruct_line(&partial, &params) else {
                    continue;
                };
                for &g in &gaps {
                    let pos = line.position_of(g).expect("gap on line");
                    store.insert(g, Cell::sealed(&self.cfg.blob, g, full[pos as usize].clone(), &params));
                }
            }
            for g in gaps {
                self.held.insert(g);
                added.push(g);
                let crossing = match line.kind {
                    LineKind::Row => g.col_line(),
                    LineKind::Column => g.row_line(),
                };
                push(crossing, &mut queue, &mut queued);
            }
        }
        added
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{EpochSeed, NodeId};
    use crate::erasure::extend_blob;
    use crate::protocol::schedule::default_schedule;

    const K: usize = 4;

    fn setup(nodes: u64, materialize: bool) -> (Arc<NodeConfig>, Arc<PeerTable>, Vec<NodeState>) {
        let params = GridParams::with_cell_bytes(K, 8, 48).unwrap();
        let ids = (0..nodes).map(NodeId::synthetic).collect();
        let table = Arc::new(PeerTable::build(ids, &EpochSeed::new(0, [1; 32]), &params, 2).unwrap());
        let blob = BlobId([9; 32]);
        let cfg = Arc::new(NodeConfig {
            params,
            slot: 3,
            blob,
            builder_token: BuilderToken::derive(0, 3, &blob),
            schedule: default_schedule(),
            samples: 5,
            trigger_delay: SimTime::from_millis(400.0),
            deadline: SimTime::from_millis(4000.0),
        });
        let view: Vec<PeerIdx> = table.peers().collect();
        let nodes = table
            .peers()
            .map(|p| NodeState::new(p, cfg.clone(), table.clone(), view.clone(), p.0 as u64, materialize))
            .collect();
        (cfg, table, nodes)
    }

    fn seed(cfg: &NodeConfig, cells: CellBundle) -> SeedMessage {
        SeedMessage {
            slot: cfg.slot,
            builder_sig: cfg.builder_token,
            cells,
            boost: None,
        }
    }

    fn sends(actions: &[Action]) -> Vec<(PeerIdx, &Message)> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::Send { to, msg } => Some((*to, msg)),
                _ => None,
            })
            .collect()
    }

    fn blob_matrix(cfg: &NodeConfig) -> crate::grid::ExtendedBlobMatrix {
        let original: Vec<Vec<u8>> = (0..K * K).map(|i| (0..8).map(|b| (i * 13 + b * 7) as u8).collect()).collect();
        extend_blob(&original, &cfg.params, cfg.blob).unwrap()
    }

    #[test]
    fn full_row_seed_leaves_row_out_of_missing() {
        let (cfg, table, mut nodes) = setup(6, false);
        let node = &mut nodes[0];
        let row = table.assignment(PeerIdx(0)).rows[0];
        let cells: Vec<CellIndex> = (0..8).map(|c| CellIndex::new(row, c)).collect();
        node.on_seed_received(&seed(&cfg, CellBundle::Ids(cells)), SimTime(10));
        assert!(node.has_started());
        let missing = node.consolidation().unwrap().missing();
        assert_eq!(missing.row_count(row), 0);
        assert_eq!(node.report().time_to_seeding, Some(SimTime(10)));
    }

    #[test]
    fn k_cells_reconstruct_the_row() {
        let (cfg, table, mut nodes) = setup(6, true);
        let m = blob_matrix(&cfg);
        let row = table.assignment(PeerIdx(0)).rows[0];
        // parity half of the row only
        let cells: Vec<Cell> = (K as u16..8).map(|c| m.cell(CellIndex::new(row, c)).clone()).collect();
        let node = &mut nodes[0];
        node.on_seed_received(&seed(&cfg, CellBundle::Cells(cells)), SimTime(1));
        for c in 0..8u16 {
            let idx = CellIndex::new(row, c);
            assert!(node.held().contains(idx));
            assert_eq!(node.payload(idx).unwrap(), m.cell(idx));
        }
        assert!(node.counters().reconstructed >= K as u64);
        assert_eq!(node.consolidation().unwrap().missing().row_count(row), 0);
    }

    #[test]
    fn duplicate_seed_is_idempotent() {
        let (cfg, table, mut nodes) = setup(6, false);
        let row = table.assignment(PeerIdx(0)).rows[0];
        let msg = seed(&cfg, CellBundle::Ids(vec![CellIndex::new(row, 0)]));
        let node = &mut nodes[0];
        node.on_seed_received(&msg, SimTime(1));
        let held = node.held().len();
        let again = node.on_seed_received(&msg, SimTime(2));
        assert!(sends(&again).is_empty());
        assert_eq!(node.held().len(), held);
        assert_eq!(node.counters().seed_cells, 1);
        assert_eq!(node.counters().duplicates, 1);
        assert_eq!(node.report().time_to_seeding, Some(SimTime(1)));
    }

    #[test]
    fn forged_or_corrupt_seeds_are_dropped() {
        let (cfg, table, mut nodes) = setup(6, true);
        let m = blob_matrix(&cfg);
        let row = table.assignment(PeerIdx(0)).rows[0];
        let mut bad = seed(&cfg, CellBundle::Ids(vec![]));
        bad.builder_sig = BuilderToken([0; 32]);
        let node = &mut nodes[0];
        node.on_seed_received(&bad, SimTime(1));
        assert_eq!(node.counters().rejected_seeds, 1);
        assert!(!node.has_started());
        let mut cell = m.cell(CellIndex::new(row, 0)).clone();
        cell.payload[0] ^= 1;
        node.on_seed_received(&seed(&cfg, CellBundle::Cells(vec![cell])), SimTime(2));
        assert_eq!(node.counters().proof_failures, 1);
        assert!(node.held().is_empty());
    }

    #[test]
    fn trigger_timer_runs_once() {
        let (cfg, _table, mut nodes) = setup(6, false);
        let q = Query {
            slot: cfg.slot,
            tag: QueryTag {
                task: FetchTask::Sampling,
                round: 1,
            },
            cells: vec![CellIndex::new(0, 0)],
        };
        let node = &mut nodes[0];
        let a = node.on_query(PeerIdx(1), &q, SimTime::from_millis(100.0));
        let timers: Vec<_> = a
            .iter()
            .filter_map(|x| match x {
                Action::Timer { at, kind } => Some((*at, *kind)),
                _ => None,
            })
            .collect();
        assert_eq!(timers, vec![(SimTime::from_millis(500.0), TimerKind::ConsolidationTrigger)]);
        let b = node.on_query(PeerIdx(2), &q, SimTime::from_millis(150.0));
        assert!(b.iter().all(|x| !matches!(x, Action::Timer { kind: TimerKind::ConsolidationTrigger, .. })));
        node.on_timer(TimerKind::ConsolidationTrigger, SimTime::from_millis(500.0));
        assert!(node.has_started());
        assert_eq!(node.report().fetch_started, Some(SimTime::from_millis(500.0)));
        assert_eq!(node.report().time_to_seeding, None);
    }

    #[test]
    fn seed_before_trigger_cancels_it() {
        let (cfg, table, mut nodes) = setup(6, false);
        let row = table.assignment(PeerIdx(0)).rows[0];
        let q = Query {
            slot: cfg.slot,
            tag: QueryTag {
                task: FetchTask::Sampling,
                round: 1,
            },
            cells: vec![CellIndex::new(row, 0)],
        };
        let node = &mut nodes[0];
        node.on_query(PeerIdx(1), &q, SimTime::from_millis(100.0));
        node.on_seed_received(&seed(&cfg, CellBundle::Ids(vec![CellIndex::new(row, 1)])), SimTime::from_millis(300.0));
        assert_eq!(node.report().fetch_started, Some(SimTime::from_millis(300.0)));
        let later = node.on_timer(TimerKind::ConsolidationTrigger, SimTime::from_millis(500.0));
        assert!(later.is_empty());
        assert_eq!(node.report().fetch_started, Some(SimTime::from_millis(300.0)));
    }

    #[test]
    fn queries_are_buffered_until_held() {
        let (cfg, table, mut nodes) = setup(6, false);
        let row = table.assignment(PeerIdx(0)).rows[0];
        let wanted = vec![CellIndex::new(row, 0), CellIndex::new(row, 1)];
        let tag = QueryTag {
            task: FetchTask::Consolidation,
            round: 1,
        };
        let q = Query {
            slot: cfg.slot,
            tag,
            cells: wanted.clone(),
        };
        let node = &mut nodes[0];
        let a = node.on_query(PeerIdx(4), &q, SimTime(0));
        assert!(sends(&a).is_empty());
        assert_eq!(node.buffered_queries(), 1);
        let b = node.on_seed_received(&seed(&cfg, CellBundle::Ids(vec![wanted[0]])), SimTime(10));
        assert!(!sends(&b).iter().any(|(_, m)| matches!(m, Message::Reply(_))));
        let c = node.on_seed_received(&seed(&cfg, CellBundle::Ids(vec![wanted[1]])), SimTime(600));
        let replies: Vec<_> = sends(&c)
            .into_iter()
            .filter_map(|(to, m)| match m {
                Message::Reply(r) => Some((to, r.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(replies.len(), 1);
        assert_eq!(replies[0].0, PeerIdx(4));
        assert_eq!(replies[0].1.tag, tag);
        assert_eq!(replies[0].1.cells.indices(), wanted);
        assert_eq!(node.buffered_queries(), 0);
        // a held request is answered immediately
        let d = node.on_query(PeerIdx(5), &q, SimTime(700));
        assert_eq!(sends(&d).len(), 1);
    }

    #[test]
    fn foreign_cells_are_ignored_unless_held() {
        let (cfg, table, mut nodes) = setup(40, false);
        let a = table.assignment(PeerIdx(0));
        let outside = (0..8u16)
            .flat_map(|r| (0..8u16).map(move |c| CellIndex::new(r, c)))
            .find(|c| !a.covers(*c))
            .expect("some cell outside custody");
        let q = Query {
            slot: cfg.slot,
            tag: QueryTag {
                task: FetchTask::Sampling,
                round: 1,
            },
            cells: vec![outside],
        };
        let node = &mut nodes[0];
        node.on_query(PeerIdx(1), &q, SimTime(0));
        assert_eq!(node.buffered_queries(), 0);
    }

    #[test]
    fn seeded_nodes_complete_sampling() {
        // every node starts with its full custody; messages are delivered by
        // hand in FIFO order
        let (cfg, table, mut nodes) = setup(8, true);
        let m = blob_matrix(&cfg);
        let mut queue: std::collections::VecDeque<(PeerIdx, PeerIdx, Message)> = Default::default();
        // seed node 0 with its full custody
        let custody = crate::assignment::custody_cells(table.assignment(PeerIdx(0)), &cfg.params);
        let cells: Vec<Cell> = custody.iter().map(|c| m.cell(*c).clone()).collect();
        let mut actions = nodes[0].on_seed_received(&seed(&cfg, CellBundle::Cells(cells)), SimTime(0));
        for p in 1..8 {
            let peer_custody = crate::assignment::custody_cells(table.assignment(PeerIdx(p)), &cfg.params);
            let cells: Vec<Cell> = peer_custody.iter().map(|c| m.cell(*c).clone()).collect();
            let more = nodes[p as usize].on_seed_received(&seed(&cfg, CellBundle::Cells(cells)), SimTime(0));
            for a in more {
                if let Action::Send { to, msg } = a {
                    queue.push_back((PeerIdx(p), to, msg));
                }
            }
        }
        for a in actions.drain(..) {
            if let Action::Send { to, msg } = a {
                queue.push_back((PeerIdx(0), to, msg));
            }
        }
        while let Some((from, to, msg)) = queue.pop_front() {
            let out = match &msg {
                Message::Query(q) => nodes[to.get()].on_query(from, q, SimTime(1)),
                Message::Reply(r) => nodes[to.get()].on_reply(from, r, SimTime(1)),
                Message::Seed(s) => nodes[to.get()].on_seed_received(s, SimTime(1)),
            };
            for a in out {
                if let Action::Send { to: next, msg } = a {
                    queue.push_back((to, next, msg));
                }
            }
        }
        for n in &nodes {
            let r = n.report();
            assert!(r.time_to_sampling.is_some(), "node {:?} did not sample", n.id());
            assert_eq!(r.verdict, Verdict::Available);
            for &s in n.samples() {
                assert_eq!(n.payload(s).unwrap(), m.cell(s));
            }
        }
    }
}
