//! Event loop for one slot.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::assignment::{EpochSeed, NodeId, PeerIdx, PeerTable};
use crate::availability::{max_withholding_pattern, WithholdingPattern};
use crate::erasure;
use crate::grid::{BlobId, ExtendedBlobMatrix, GridParams};
use crate::protocol::message::{BoostAttachment, BuilderToken, CellBundle, Message, SeedMessage};
use crate::protocol::node::{Action, NodeConfig, NodeReport, NodeState, TimerKind};
use crate::protocol::seeding::{plan_seeding, BoostIndex};
use crate::time::SimTime;

use super::config::ScenarioConfig;
use super::faults::{dead_set, view_of};
use super::latency::{synth_latency_matrix, LatencyMatrix, LatencyModel};
use super::network::{BandwidthModel, EndpointCounters, NetStats, Network};
use super::{derive_seed, SimError};

/// Largest generated topology; bigger populations share vertices.
pub const MAX_GENERATED_VERTICES: usize = 2000;

#[derive(Debug, Clone)]
enum EventKind {
    Deliver { from: usize, to: usize, bytes: usize, msg: Message },
    Timer { node: usize, kind: TimerKind },
}

#[derive(Debug)]
struct Event {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so that the max-heap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Time-ordered queue; ties go to the earlier insertion.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn push(&mut self, at: SimTime, kind: EventKind) {
        self.heap.push(Event { at, seq: self.seq, kind });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuilderStats {
    pub messages: u64,
    pub payload_bytes: u64,
    pub wire_bytes: u64,
    /// Cells of lines without any holder in the builder's view.
    pub unseeded_cells: u64,
    /// When the last seed message left the builder's uplink.
    pub seeding_done: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeOutcome {
    pub index: usize,
    pub dead: bool,
    pub report: NodeReport,
    pub net: EndpointCounters,
}

#[derive(Debug, Clone)]
pub struct SlotResult {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub samples: usize,
    pub nodes: Vec<NodeOutcome>,
    pub builder: BuilderStats,
    pub network: NetStats,
    /// Messages still travelling when the simulation stopped.
    pub in_flight_at_end: u64,
    pub events: u64,
    pub end_time: SimTime,
    pub withheld_cells: u64,
}

impl SlotResult {
    pub fn live_nodes(&self) -> impl Iterator<Item = &NodeOutcome> {
        self.nodes.iter().filter(|n| !n.dead)
    }

    /// Fraction of live nodes that finished sampling by the deadline.
    pub fn success_fraction(&self) -> f64 {
        let deadline = SimTime::from_millis(self.config.deadline_ms);
        let live = self.live_nodes().count();
        if live == 0 {
            return 0.0;
        }
        let ok = self
            .live_nodes()
            .filter(|n| n.report.time_to_sampling.is_some_and(|t| t <= deadline))
            .count();
        ok as f64 / live as f64
    }
}

fn epoch_seed(seed: u64, slot: u64) -> EpochSeed {
    let mut h = Sha256::new();
    h.update(b"epoch-seed");
    h.update(seed.to_le_bytes());
    EpochSeed::new(EpochSeed::epoch_of_slot(slot), h.finalize().into())
}

fn blob_id(seed: u64, slot: u64) -> BlobId {
    let mut h = Sha256::new();
    h.update(b"blob");
    h.update(seed.to_le_bytes());
    h.update(slot.to_le_bytes());
    BlobId(h.finalize().into())
}

fn random_blob(params: &GridParams, blob: BlobId, seed: u64) -> Result<ExtendedBlobMatrix, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let original: Vec<Vec<u8>> = (0..params.k * params.k)
        .map(|_| (0..params.cell_payload_bytes).map(|_| rng.gen()).collect())
        .collect();
    erasure::extend_blob(&original, params, blob).map_err(|e| SimError::Config(e.to_string()))
}

fn random_withholding(params: &GridParams, seed: u64) -> WithholdingPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || -> BTreeSet<u16> {
        rand::seq::index::sample(&mut rng, params.n, params.k + 1)
            .into_iter()
            .map(|i| i as u16)
            .collect()
    };
    let rows = pick();
    let cols = pick();
    max_withholding_pattern(&rows, &cols, params).expect("anchor sets have k + 1 valid lines")
}

/// Runs one slot of `cfg` with master seed `seed`.
pub fn run_slot(cfg: &ScenarioConfig, seed: u64) -> Result<SlotResult, SimError> {
    cfg.validate()?;
    let params = cfg.grid()?;
    let samples = cfg.sample_count()?;
    let nodes_n = cfg.node_count;
    let builder = nodes_n;

    let es = epoch_seed(seed, cfg.slot);
    let ids: Vec<NodeId> = (0..nodes_n as u64).map(NodeId::synthetic).collect();
    let table =
        Arc::new(PeerTable::build(ids, &es, &params, cfg.rows_per_node).map_err(|e| SimError::Config(e.to_string()))?);

    let matrix = match &cfg.latency.matrix_file {
        Some(path) => LatencyMatrix::from_csv(path)?,
        None => {
            let v = match cfg.latency.vertices {
                0 => (nodes_n + 1).min(MAX_GENERATED_VERTICES),
                v => v,
            };
            synth_latency_matrix(&cfg.latency.targets(), v, derive_seed(seed, "latency", 0))?
        }
    };
    let latency = LatencyModel::place(matrix, nodes_n, derive_seed(seed, "placement", 0));
    let bandwidth = BandwidthModel {
        node_bps: cfg.node_bandwidth_mbps * 1e6,
        builder_bps: cfg.builder_bandwidth_mbps * 1e6,
    };
    let mut net = Network::new(latency, bandwidth, cfg.loss_rate, derive_seed(seed, "loss", 0));

    let dead = dead_set(nodes_n, cfg.dead_fraction, derive_seed(seed, "dead", 0));
    let view_seed = derive_seed(seed, "views", 0);

    let blob = blob_id(seed, cfg.slot);
    let token = BuilderToken::derive(derive_seed(seed, "builder-secret", 0), cfg.slot, &blob);
    let node_cfg = Arc::new(NodeConfig {
        params,
        slot: cfg.slot,
        blob,
        builder_token: token,
        schedule: cfg.schedule.resolve(),
        samples,
        trigger_delay: SimTime::from_millis(cfg.trigger_delay_ms),
        deadline: SimTime::from_millis(cfg.deadline_ms),
    });
    let matrix_cells = if cfg.materialize {
        Some(random_blob(&params, blob, derive_seed(seed, "blob-data", 0))?)
    } else {
        None
    };
    let withheld = cfg.withhold.then(|| random_withholding(&params, derive_seed(seed, "withhold", 0)));

    let mut nodes: Vec<NodeState> = (0..nodes_n)
        .map(|i| {
            NodeState::new(
                PeerIdx(i as u32),
                node_cfg.clone(),
                table.clone(),
                view_of(i, nodes_n, cfg.out_of_view_fraction, view_seed),
                derive_seed(seed, "node", i as u64),
                cfg.materialize,
            )
        })
        .collect();

    // the builder sees every node, dead or alive
    let mut builder_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "builder", 0));
    let everyone: Vec<PeerIdx> = table.peers().collect();
    let plan = plan_seeding(cfg.seeding_policy(), &table, &everyone, withheld.as_ref(), &mut builder_rng);
    let boost = Arc::new(BoostIndex::build(&plan, &table));
    let mut entry_counts: HashMap<PeerIdx, usize> = HashMap::new();
    let mut queue = EventQueue::default();
    let mut bstats = BuilderStats {
        unseeded_cells: plan.unseeded.len() as u64,
        ..Default::default()
    };
    for batch in plan.batches(&mut builder_rng) {
        // the boost map rides on the first batch of each recipient only
        let attachment = match entry_counts.entry(batch.recipient) {
            std::collections::hash_map::Entry::Occupied(_) => None,
            std::collections::hash_map::Entry::Vacant(v) => {
                let entries = *v.insert(boost.entry_count_for(batch.recipient, &table));
                Some(BoostAttachment {
                    index: boost.clone(),
                    entries,
                })
            }
        };
        let cells = match &matrix_cells {
            Some(m) => CellBundle::Cells(batch.cells.iter().map(|&c| m.cell(c).clone()).collect()),
            None => CellBundle::Ids(batch.cells),
        };
        bstats.payload_bytes += (cells.len() * params.cell_bytes()) as u64;
        let msg = Message::Seed(SeedMessage {
            slot: cfg.slot,
            builder_sig: token,
            cells,
            boost: attachment,
        });
        let bytes = msg.wire_bytes(&params);
        bstats.messages += 1;
        bstats.wire_bytes += bytes as u64;
        let to = batch.recipient.get();
        if let Some(at) = net.send(builder, to, bytes, SimTime::ZERO) {
            queue.push(at, EventKind::Deliver { from: builder, to, bytes, msg });
        }
    }
    bstats.seeding_done = net.busy_until(builder);
    drop(plan);

    let end = SimTime::from_millis(cfg.deadline_ms + cfg.drain_ms);
    let mut events = 0u64;
    let mut now = SimTime::ZERO;
    while queue.peek_time().is_some_and(|t| t <= end) {
        let ev = queue.pop().expect("peeked event");
        now = ev.at;
        events += 1;
        let (node, actions) = match ev.kind {
            EventKind::Deliver { from, to, bytes, msg } => {
                net.delivered(to, bytes);
                if dead[to] {
                    continue;
                }
                let sender = PeerIdx(from as u32);
                let state = &mut nodes[to];
                let actions = match &msg {
                    Message::Seed(s) => state.on_seed_received(s, now),
                    Message::Query(q) => state.on_query(sender, q, now),
                    Message::Reply(r) => state.on_reply(sender, r, now),
                };
                (to, actions)
            }
            EventKind::Timer { node, kind } => (node, nodes[node].on_timer(kind, now)),
        };
        for a in actions {
            match a {
                Action::Send { to, msg } => {
                    let bytes = msg.wire_bytes(&params);
                    let to = to.get();
                    if let Some(at) = net.send(node, to, bytes, now) {
                        queue.push(at, EventKind::Deliver { from: node, to, bytes, msg });
                    }
                }
                Action::Timer { at, kind } => queue.push(at, EventKind::Timer { node, kind }),
            }
        }
    }
    let in_flight_at_end = queue_deliveries(queue);
    let end_time = now.max(end);

    let outcomes = nodes
        .iter_mut()
        .enumerate()
        .map(|(i, n)| {
            n.finish(end_time);
            NodeOutcome {
                index: i,
                dead: dead[i],
                report: n.report(),
                net: net.counters(i),
            }
        })
        .collect();
    Ok(SlotResult {
        config: cfg.clone(),
        seed,
        samples,
        nodes: outcomes,
        builder: bstats,
        network: net.stats(),
        in_flight_at_end,
        events,
        end_time,
        withheld_cells: withheld.map_or(0, |w| w.withheld.len() as u64),
    })
}

fn queue_deliveries(mut queue: EventQueue) -> u64 {
    let mut n = 0;
    while let Some(ev) = queue.pop() {
        if matches!(ev.kind, EventKind::Deliver { .. }) {
            n += 1;
        }
    }
    n
}
