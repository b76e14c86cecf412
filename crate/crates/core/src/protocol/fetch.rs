//! Round-based adaptive fetching.
//!
//! Each round scores the peers that have not been queried yet, sorts them,
//! and greedily plans queries until every missing cell is requested from
//! `k_i` peers or the candidates run out. Queried peers are never asked
//! again by the same fetch.
//!
//! With a boost map, round `i` trusts the first `k_i` copy levels: a peer
//! seeded at those levels is asked only for the cells it was seeded with,
//! and cells seeded to this node count as already requested once.
//! Consolidation stops planning a line once held plus fully planned cells
//! reach `k`; reconstruction supplies the rest.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, PeerIdx, PeerTable};
use crate::cellset::CellSet;
use crate::grid::{CellIndex, LineId, LineKind};
use crate::time::SimTime;

use super::message::FetchTask;
use super::schedule::FetchSchedule;
use super::seeding::BoostIndex;

/// Read-only inputs of a planning pass.
#[derive(Clone, Copy)]
pub struct FetchContext<'a> {
    pub me: PeerIdx,
    pub table: &'a PeerTable,
    pub schedule: &'a FetchSchedule,
    pub boost: Option<&'a BoostIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedQuery {
    pub peer: PeerIdx,
    pub cells: Vec<CellIndex>,
}

/// Telemetry of one fetch round. Replies and cells are attributed to the
/// round that issued the query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    pub missing_at_start: u64,
    pub queries: u64,
    pub cells_requested: u64,
    pub replies_in_round: u64,
    pub replies_after_round: u64,
    pub cells_in_round: u64,
    pub cells_after_round: u64,
    pub duplicates: u64,
    /// Missing cells left when the round ended, or when the fetch completed.
    pub missing_at_end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchOutcome {
    Running,
    Complete(SimTime),
    Failed(SimTime),
}

#[derive(Debug, Clone)]
pub struct FetchState {
    task: FetchTask,
    missing: CellSet,
    initial: usize,
    queryable: Vec<PeerIdx>,
    round: u32,
    boost_known: bool,
    in_flight: HashMap<PeerIdx, u32>,
    rounds: Vec<RoundStats>,
    outcome: FetchOutcome,
}

impl FetchState {
    /// `queryable` is taken in the given order; ties in score keep it.
    pub fn new(task: FetchTask, missing: CellSet, queryable: Vec<PeerIdx>, now: SimTime) -> Self {
        let initial = missing.len();
        let outcome = if initial == 0 {
            FetchOutcome::Complete(now)
        } else {
            FetchOutcome::Running
        };
        Self {
            task,
            missing,
            initial,
            queryable,
            round: 0,
            boost_known: false,
            in_flight: HashMap::new(),
            rounds: Vec::new(),
            outcome,
        }
    }

    pub fn task(&self) -> FetchTask {
        self.task
    }

    pub fn missing(&self) -> &CellSet {
        &self.missing
    }

    /// Size of the target set when the fetch started.
    pub fn initial_missing(&self) -> usize {
        self.initial
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn queryable(&self) -> &[PeerIdx] {
        &self.queryable
    }

    pub fn outcome(&self) -> FetchOutcome {
        self.outcome
    }

    pub fn is_running(&self) -> bool {
        self.outcome == FetchOutcome::Running
    }

    pub fn rounds(&self) -> &[RoundStats] {
        &self.rounds
    }

    pub fn set_boost_known(&mut self) {
        self.boost_known = true;
    }

    /// Score of a candidate: missing cells it holds plus `cb_boost` per
    /// missing cell it was seeded with on one of our lines.
    pub fn score(&self, ctx: &FetchContext<'_>, q: PeerIdx) -> u64 {
        let plain = plain_score(&self.missing, ctx.table.assignment(q));
        let boosted = self.boosted_cells(ctx, ctx.schedule.redundancy(self.round + 1));
        plain + ctx.schedule.cb_boost * boosted.get(&q).map_or(0, |v| v.len() as u64)
    }

    /// Missing cells each boosted peer was seeded with on one of our lines,
    /// counting only copy levels below `levels`.
    fn boosted_cells(&self, ctx: &FetchContext<'_>, levels: u32) -> HashMap<PeerIdx, Vec<CellIndex>> {
        let mut out: HashMap<PeerIdx, Vec<CellIndex>> = HashMap::new();
        let Some(index) = ctx.boost.filter(|_| self.boost_known) else {
            return out;
        };
        let mine = ctx.table.assignment(ctx.me);
        for line in mine.lines() {
            if self.missing.line_count(line) == 0 {
                continue;
            }
            let is_col = line.kind == LineKind::Column;
            for e in index.line_entries(line) {
                if e.peer == ctx.me || e.copy >= levels {
                    continue;
                }
                let peer = ctx.table.assignment(e.peer);
                let hits = e
                    .cells
                    .iter()
                    .copied()
                    .filter(|&c| self.missing.contains(c))
                    // a cell on one of our rows is already listed under that row
                    .filter(|c| !(is_col && mine.has_row(c.row) && peer.has_row(c.row)));
                let mut hits = hits.peekable();
                if hits.peek().is_some() {
                    out.entry(e.peer).or_default().extend(hits);
                }
            }
        }
        out
    }

    /// Missing cells the boost map lists as seeded to this node.
    fn own_seeded(&self, ctx: &FetchContext<'_>) -> Vec<CellIndex> {
        let Some(index) = ctx.boost.filter(|_| self.boost_known) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for line in ctx.table.assignment(ctx.me).lines() {
            if self.missing.line_count(line) == 0 {
                continue;
            }
            for e in index.line_entries(line).iter().filter(|e| e.peer == ctx.me) {
                out.extend(e.cells.iter().copied().filter(|&c| self.missing.contains(c)));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Starts the next round and returns its query plan. Planned peers leave
    /// the queryable set for good.
    pub fn plan_round(&mut self, ctx: &FetchContext<'_>) -> Vec<PlannedQuery> {
        self.round += 1;
        let mut stats = RoundStats {
            round: self.round,
            missing_at_start: self.missing.len() as u64,
            ..Default::default()
        };
        if self.missing.is_empty() || !self.is_running() {
            self.rounds.push(stats);
            return Vec::new();
        }
        let k_i = ctx.schedule.redundancy(self.round);
        // early copies first: round i trusts the first k_i copy levels
        let boosted = self.boosted_cells(ctx, k_i);

        let mut ranked: Vec<(u64, usize)> = self
            .queryable
            .iter()
            .enumerate()
            .filter(|(_, &q)| q != ctx.me)
            .filter_map(|(pos, &q)| {
                let plain = plain_score(&self.missing, ctx.table.assignment(q));
                let b = boosted.get(&q).map_or(0, |v| v.len() as u64);
                let s = plain + ctx.schedule.cb_boost * b;
                (s > 0).then_some((s, pos))
            })
            .collect();
        ranked.sort_by_key(|r| std::cmp::Reverse(r.0));

        let mut open = self.missing.clone();
        let mut lines = LineProgress::new(self.task, &self.missing, ctx);
        let mut planned_count: HashMap<CellIndex, u32> = HashMap::new();
        // cells the builder seeded to us count as already asked for once
        for c in self.own_seeded(ctx) {
            planned_count.insert(c, 1);
            if k_i <= 1 {
                open.remove(c);
                lines.covered(c, &mut open);
            }
        }
        let mut used = vec![false; self.queryable.len()];
        let mut plan = Vec::new();
        for &(_, pos) in &ranked {
            if open.is_empty() {
                break;
            }
            let q = self.queryable[pos];
            // boosted peers are asked only for what they were seeded with
            let candidates: Vec<CellIndex> = match boosted.get(&q) {
                Some(seeded) => seeded.clone(),
                None => custody_intersection(&open, ctx.table.assignment(q)),
            };
            let mut cells = Vec::new();
            for c in candidates {
                // a line may saturate midway through the candidates
                if !open.contains(c) {
                    continue;
                }
                cells.push(c);
                let n = planned_count.entry(c).or_insert(0);
                *n += 1;
                if *n == k_i {
                    open.remove(c);
                    lines.covered(c, &mut open);
                }
            }
            if cells.is_empty() {
                continue;
            }
            used[pos] = true;
            stats.queries += 1;
            stats.cells_requested += cells.len() as u64;
            self.in_flight.insert(q, self.round);
            plan.push(PlannedQuery { peer: q, cells });
        }
        let mut pos = 0;
        self.queryable.retain(|_| {
            pos += 1;
            !used[pos - 1]
        });
        self.rounds.push(stats);
        plan
    }

    /// Removes newly held cells from the missing set. Returns `true` if this
    /// completed the fetch.
    pub fn on_cells_held(&mut self, cells: &[CellIndex], now: SimTime) -> bool {
        for &c in cells {
            self.missing.remove(c);
        }
        if self.is_running() && self.missing.is_empty() {
            self.outcome = FetchOutcome::Complete(now);
            if let Some(last) = self.rounds.last_mut() {
                last.missing_at_end = 0;
            }
            return true;
        }
        false
    }

    /// Whether a reply to a query of `round` arriving now counts as in-round.
    pub fn is_current(&self, round: u32) -> bool {
        self.is_running() && round == self.round
    }

    /// Records a reply to a query issued in `round`; `in_round` comes from
    /// [`FetchState::is_current`] evaluated before the reply's cells were
    /// absorbed.
    pub fn on_reply(&mut self, from: PeerIdx, round: u32, in_round: bool, new_cells: u64, duplicates: u64) {
        self.in_flight.remove(&from);
        if let Some(stats) = self.rounds.get_mut(round as usize - 1) {
            if in_round {
                stats.replies_in_round += 1;
                stats.cells_in_round += new_cells;
            } else {
                stats.replies_after_round += 1;
                stats.cells_after_round += new_cells;
            }
            stats.duplicates += duplicates;
        }
    }

    /// Closes the current round. Returns `false` when the fetch must stop.
    pub fn end_round(&mut self, ctx: &FetchContext<'_>, now: SimTime, deadline: SimTime) -> bool {
        if let Some(last) = self.rounds.last_mut() {
            last.missing_at_end = self.missing.len() as u64;
        }
        if !self.is_running() {
            return false;
        }
        if now >= deadline || self.round >= ctx.schedule.max_rounds {
            self.outcome = FetchOutcome::Failed(now);
            return false;
        }
        true
    }

    /// Stops a running fetch, e.g. at the slot deadline.
    pub fn abort(&mut self, now: SimTime) {
        if self.is_running() {
            if let Some(last) = self.rounds.last_mut() {
                last.missing_at_end = self.missing.len() as u64;
            }
            self.outcome = FetchOutcome::Failed(now);
        }
    }

    pub fn outstanding(&self) -> usize {
        self.in_flight.len()
    }
}

/// Consolidation only needs `k` cells per custody line: once a line's held
/// cells plus fully planned cells reach `k`, the rest of it is left to
/// reconstruction.
struct LineProgress {
    k: usize,
    lines: Vec<(LineId, usize)>,
}

impl LineProgress {
    fn new(task: FetchTask, missing: &CellSet, ctx: &FetchContext<'_>) -> Self {
        let params = ctx.table.params();
        let lines = match task {
            FetchTask::Sampling => Vec::new(),
            FetchTask::Consolidation => ctx
                .table
                .assignment(ctx.me)
                .lines()
                .filter(|&l| missing.line_count(l) > 0)
                .map(|l| (l, params.n - missing.line_count(l)))
                .collect(),
        };
        Self { k: params.k, lines }
    }

    fn covered(&mut self, c: CellIndex, open: &mut CellSet) {
        for (line, progress) in &mut self.lines {
            if !line.contains(c) || *progress >= self.k {
                continue;
            }
            *progress += 1;
            if *progress >= self.k {
                let rest: Vec<CellIndex> = open.line_members(*line).collect();
                for r in rest {
                    open.remove(r);
                }
            }
        }
    }
}

/// `|σ(q) ∩ missing|` from per-line counts, correcting for cells lying on
/// both an assigned row and an assigned column.
pub fn plain_score(missing: &CellSet, a: &Assignment) -> u64 {
    let mut s: u64 = 0;
    for &r in &a.rows {
        s += missing.row_count(r) as u64;
    }
    let mut any_col = false;
    for &c in &a.cols {
        let n = missing.col_count(c);
        any_col |= n > 0;
        s += n as u64;
    }
    if any_col && s > 0 {
        for &r in &a.rows {
            if missing.row_count(r) == 0 {
                continue;
            }
            for &c in &a.cols {
                if missing.contains(CellIndex::new(r, c)) {
                    s -= 1;
                }
            }
        }
    }
    s
}

/// Cells of `open` lying on one of the lines of `a`, without repeats.
pub fn custody_intersection(open: &CellSet, a: &Assignment) -> Vec<CellIndex> {
    let mut out = Vec::new();
    for &r in &a.rows {
        if open.row_count(r) > 0 {
            out.extend(open.line_members(LineId::row(r)));
        }
    }
    for &c in &a.cols {
        if open.col_count(c) > 0 {
            out.extend(open.line_members(LineId::column(c)).filter(|cell| !a.has_row(cell.row)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{EpochSeed, NodeId};
    use crate::grid::GridParams;
    use crate::protocol::schedule::default_schedule;
    use crate::protocol::seeding::{plan_seeding, Delivery, Parcel, SeedingPlan, SeedingPolicy};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeMap, BTreeSet};

    fn table(nodes: u64, k: usize, seed: u8) -> PeerTable {
        let params = GridParams::new(k).unwrap();
        let ids = (0..nodes).map(NodeId::synthetic).collect();
        PeerTable::build(ids, &EpochSeed::new(0, [seed; 32]), &params, 2).unwrap()
    }

    /// Two distinct peers other than `me` holding `cell`.
    fn holders_of(t: &PeerTable, cell: CellIndex, me: PeerIdx) -> Vec<PeerIdx> {
        t.peers().filter(|&p| p != me && t.assignment(p).covers(cell)).collect()
    }

    #[test]
    fn empty_missing_plans_nothing() {
        let t = table(10, 16, 1);
        let s = default_schedule();
        let ctx = FetchContext { me: PeerIdx(0), table: &t, schedule: &s, boost: None };
        let mut fs = FetchState::new(FetchTask::Sampling, CellSet::new(32), t.peers().collect(), SimTime::ZERO);
        assert_eq!(fs.outcome(), FetchOutcome::Complete(SimTime::ZERO));
        assert!(fs.plan_round(&ctx).is_empty());
    }

    #[test]
    fn boost_picks_the_seeded_holder() {
        let t = table(200, 16, 2);
        let me = PeerIdx(0);
        let line = t.assignment(me).lines().next().unwrap();
        let cell = line.cell_at(3);
        // two other holders of the line
        let others: Vec<PeerIdx> = t.line_holders(line).iter().copied().filter(|&p| p != me).collect();
        let (a, b) = (others[0], others[1]);
        let plan = SeedingPlan {
            policy: SeedingPolicy::single(),
            params: *t.params(),
            parcels: vec![Parcel { line, cells: vec![cell] }],
            deliveries: vec![Delivery { recipient: b, parcel: 0, copy: 0 }],
            unseeded: vec![],
        };
        let index = BoostIndex::build(&plan, &t);
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: Some(&index) };
        let missing = CellSet::from_cells(32, [cell]);
        let mut fs = FetchState::new(FetchTask::Consolidation, missing, vec![a, b], SimTime::ZERO);
        fs.set_boost_known();
        assert_eq!(fs.score(&ctx, a), 1);
        assert_eq!(fs.score(&ctx, b), 1 + s.cb_boost);
        let q = fs.plan_round(&ctx);
        assert_eq!(q, vec![PlannedQuery { peer: b, cells: vec![cell] }]);
        assert_eq!(fs.queryable(), &[a]);
    }

    #[test]
    fn round_three_asks_four_of_five() {
        let t = table(400, 16, 3);
        let me = PeerIdx(0);
        let cell = CellIndex::new(5, 9);
        let holders = holders_of(&t, cell, me);
        assert!(holders.len() >= 5);
        let five: Vec<PeerIdx> = holders[..5].to_vec();
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: None };
        let mut fs = FetchState::new(FetchTask::Sampling, CellSet::from_cells(32, [cell]), five, SimTime::ZERO);
        fs.round = 2;
        let plan = fs.plan_round(&ctx);
        assert_eq!(fs.round(), 3);
        assert_eq!(plan.len(), 4);
        assert!(plan.iter().all(|q| q.cells == vec![cell]));
        assert_eq!(fs.queryable().len(), 1);
    }

    #[test]
    fn boosted_peers_dominate() {
        let t = table(300, 16, 4);
        let me = PeerIdx(0);
        let mine = t.assignment(me).clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plan = plan_seeding(SeedingPolicy::single(), &t, &t.peers().collect::<Vec<_>>(), None, &mut rng);
        let index = BoostIndex::build(&plan, &t);
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: Some(&index) };
        let custody = crate::assignment::custody_cells(&mine, t.params());
        let mut fs = FetchState::new(
            FetchTask::Consolidation,
            CellSet::from_cells(32, custody),
            t.peers().filter(|&p| p != me).collect(),
            SimTime::ZERO,
        );
        fs.set_boost_known();
        let boosted = fs.boosted_cells(&ctx, u32::MAX);
        let scores: Vec<(PeerIdx, u64)> = fs.queryable().iter().map(|&q| (q, fs.score(&ctx, q))).collect();
        for &(p, sp) in &scores {
            if !boosted.contains_key(&p) {
                continue;
            }
            for &(q, sq) in &scores {
                if !boosted.contains_key(&q) && sq < s.cb_boost {
                    assert!(sp > sq);
                }
            }
        }
    }

    fn consolidation_state(t: &PeerTable, me: PeerIdx, held: &[CellIndex]) -> FetchState {
        let custody = crate::assignment::custody_cells(t.assignment(me), t.params());
        let missing = CellSet::from_cells(t.params().n, custody.into_iter().filter(|c| !held.contains(c)));
        let mut fs = FetchState::new(
            FetchTask::Consolidation,
            missing,
            t.peers().filter(|&p| p != me).collect(),
            SimTime::ZERO,
        );
        fs.set_boost_known();
        fs
    }

    #[test]
    fn consolidation_asks_for_k_cells_per_line() {
        let t = table(300, 16, 6);
        let me = PeerIdx(0);
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: None };
        let mut fs = consolidation_state(&t, me, &[]);
        let total = fs.missing().len();
        let plan = fs.plan_round(&ctx);
        let asked: BTreeSet<CellIndex> = plan.iter().flat_map(|q| q.cells.iter().copied()).collect();
        assert!(asked.len() < total, "{} of {}", asked.len(), total);
        for line in t.assignment(me).lines() {
            let on_line = asked.iter().filter(|c| line.contains(**c)).count();
            assert!(on_line >= t.params().k, "{line:?}: {on_line}");
        }
    }

    #[test]
    fn boosted_peers_are_asked_for_their_seed_only() {
        let t = table(300, 16, 7);
        let me = PeerIdx(0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = plan_seeding(SeedingPolicy::single(), &t, &t.peers().collect::<Vec<_>>(), None, &mut rng);
        let index = BoostIndex::build(&plan, &t);
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: Some(&index) };
        let mut fs = consolidation_state(&t, me, &plan.cells_for(me));
        let boosted = fs.boosted_cells(&ctx, 1);
        assert!(!boosted.is_empty());
        for q in fs.plan_round(&ctx) {
            if let Some(seeded) = boosted.get(&q.peer) {
                assert!(q.cells.iter().all(|c| seeded.contains(c)), "{:?}", q.peer);
            }
        }
    }

    #[test]
    fn round_one_trusts_first_copies_and_own_seed() {
        let t = table(300, 16, 8);
        let me = PeerIdx(0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let plan = plan_seeding(SeedingPolicy::redundant(4), &t, &t.peers().collect::<Vec<_>>(), None, &mut rng);
        let index = BoostIndex::build(&plan, &t);
        let s = default_schedule();
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: Some(&index) };
        // nothing has arrived yet, but the boost map announces our own seed
        let mut fs = consolidation_state(&t, me, &[]);
        let own: BTreeSet<CellIndex> = plan.cells_for(me).into_iter().collect();
        assert!(!own.is_empty());
        let first_copies: BTreeSet<(PeerIdx, CellIndex)> = plan
            .deliveries
            .iter()
            .filter(|d| d.copy == 0)
            .flat_map(|d| plan.parcels[d.parcel as usize].cells.iter().map(move |&c| (d.recipient, c)))
            .collect();
        let boosted = fs.boosted_cells(&ctx, 1);
        for q in fs.plan_round(&ctx) {
            for c in &q.cells {
                assert!(!own.contains(c), "own cell {c} requested");
                if boosted.contains_key(&q.peer) {
                    assert!(first_copies.contains(&(q.peer, *c)));
                }
            }
        }
    }

    #[test]
    fn plain_score_matches_enumeration() {
        let t = table(50, 16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        let missing = CellSet::from_cells(
            32,
            (0..300).map(|_| CellIndex::new(rng.gen_range(0..32), rng.gen_range(0..32))),
        );
        for p in t.peers() {
            let a = t.assignment(p);
            let direct = missing.iter().filter(|c| a.covers(*c)).count() as u64;
            assert_eq!(plain_score(&missing, a), direct);
            assert_eq!(custody_intersection(&missing, a).len() as u64, direct);
        }
    }

    #[test]
    fn completion_and_reply_accounting() {
        let t = table(50, 16, 6);
        let s = default_schedule();
        let me = PeerIdx(0);
        let ctx = FetchContext { me, table: &t, schedule: &s, boost: None };
        let cells = [CellIndex::new(1, 1), CellIndex::new(2, 2)];
        let mut fs = FetchState::new(FetchTask::Sampling, CellSet::from_cells(32, cells), t.peers().collect(), SimTime::ZERO);
        let plan = fs.plan_round(&ctx);
        assert!(!plan.is_empty());
        assert!(!fs.on_cells_held(&cells[..1], SimTime(5)));
        fs.on_reply(plan[0].peer, 1, fs.is_current(1), 1, 0);
        assert!(fs.end_round(&ctx, SimTime(10), SimTime(100)));
        assert_eq!(fs.rounds()[0].missing_at_end, 1);
        fs.plan_round(&ctx);
        fs.on_reply(plan[0].peer, 1, fs.is_current(1), 0, 1);
        assert!(fs.on_cells_held(&cells[1..], SimTime(20)));
        assert_eq!(fs.outcome(), FetchOutcome::Complete(SimTime(20)));
        let r1 = &fs.rounds()[0];
        assert_eq!((r1.replies_in_round, r1.replies_after_round, r1.duplicates), (1, 1, 1));
        assert!(!fs.end_round(&ctx, SimTime(30), SimTime(100)));
    }

    #[test]
    fn deadline_fails_the_fetch() {
        let t = table(5, 16, 7);
        let s = default_schedule();
        let ctx = FetchContext { me: PeerIdx(0), table: &t, schedule: &s, boost: None };
        let mut fs = FetchState::new(
            FetchTask::Sampling,
            CellSet::from_cells(32, [CellIndex::new(0, 0)]),
            vec![],
            SimTime::ZERO,
        );
        fs.plan_round(&ctx);
        assert!(!fs.end_round(&ctx, SimTime(100), SimTime(100)));
        assert_eq!(fs.outcome(), FetchOutcome::Failed(SimTime(100)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rounds_respect_redundancy_and_never_repeat(seed in 0u64..1000, cells in 1usize..60) {
            let t = table(120, 16, (seed % 200) as u8);
            let me = PeerIdx(0);
            let s = default_schedule();
            let ctx = FetchContext { me, table: &t, schedule: &s, boost: None };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            let target: BTreeSet<CellIndex> =
                (0..cells).map(|_| CellIndex::new(rng.gen_range(0..32), rng.gen_range(0..32))).collect();
            let mut fs = FetchState::new(
                FetchTask::Sampling,
                CellSet::from_cells(32, target.iter().copied()),
                t.peers().filter(|&p| p != me).collect(),
                SimTime::ZERO,
            );
            let mut queried = BTreeSet::new();
            for round in 1..=6u32 {
                let untapped: Vec<PeerIdx> = fs.queryable().to_vec();
                let plan = fs.plan_round(&ctx);
                let k_i = s.redundancy(round) as usize;
                let mut per_cell: BTreeMap<CellIndex, usize> = BTreeMap::new();
                for q in &plan {
                    prop_assert!(queried.insert(q.peer), "peer queried twice");
                    for c in &q.cells {
                        prop_assert!(t.assignment(q.peer).covers(*c));
                        *per_cell.entry(*c).or_default() += 1;
                    }
                }
                for c in fs.missing().iter() {
                    let available = untapped.iter().filter(|p| t.assignment(**p).covers(c)).count();
                    prop_assert_eq!(per_cell.get(&c).copied().unwrap_or(0), k_i.min(available));
                }
                // nothing arrives, the round just times out
                prop_assert!(fs.end_round(&ctx, SimTime(round as u64), SimTime(u64::MAX)));
            }
        }
    }
}
