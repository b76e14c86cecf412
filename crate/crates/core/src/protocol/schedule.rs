use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Per-round timeouts and query redundancy for the adaptive fetcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchSchedule {
    /// Round durations in milliseconds; the last value repeats.
    pub timeouts_ms: Vec<f64>,
    /// Copies requested per missing cell in each round; the last value repeats.
    pub redundancy: Vec<u32>,
    /// Score bonus per missing cell a peer was seeded with.
    pub cb_boost: u64,
    pub max_rounds: u32,
}

pub const DEFAULT_MAX_ROUNDS: u32 = 50;
pub const DEFAULT_CB_BOOST: u64 = 10_000;

impl FetchSchedule {
    /// Timeout of round `round` (1-based).
    pub fn timeout(&self, round: u32) -> SimTime {
        SimTime::from_millis(pick(&self.timeouts_ms, round))
    }

    /// Redundancy `k_i` of round `round` (1-based).
    pub fn redundancy(&self, round: u32) -> u32 {
        pick(&self.redundancy, round)
    }

    /// Timeouts never grow and redundancy never shrinks from one round to
    /// the next.
    pub fn is_monotone(&self) -> bool {
        let rounds = self.max_rounds.max(1);
        (1..rounds).all(|i| {
            self.timeout(i + 1) <= self.timeout(i) && self.redundancy(i + 1) >= self.redundancy(i)
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeouts_ms.is_empty() || self.redundancy.is_empty() {
            return Err("schedule needs at least one timeout and one redundancy value".into());
        }
        if self.timeouts_ms.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err("round timeouts must be positive".into());
        }
        if self.redundancy.contains(&0) {
            return Err("round redundancy must be at least 1".into());
        }
        if self.max_rounds == 0 {
            return Err("max_rounds must be at least 1".into());
        }
        Ok(())
    }
}

fn pick<T: Copy>(values: &[T], round: u32) -> T {
    let i = (round.max(1) as usize - 1).min(values.len() - 1);
    values[i]
}

/// Halving timeouts floored at 100 ms and redundancy growing by two up to 10.
pub fn default_schedule() -> FetchSchedule {
    FetchSchedule {
        timeouts_ms: vec![400.0, 200.0, 100.0],
        redundancy: vec![1, 2, 4, 6, 8, 10],
        cb_boost: DEFAULT_CB_BOOST,
        max_rounds: DEFAULT_MAX_ROUNDS,
    }
}

/// Baseline: fixed 400 ms rounds with a single copy per cell.
pub fn constant_schedule() -> FetchSchedule {
    FetchSchedule {
        timeouts_ms: vec![400.0],
        redundancy: vec![1],
        cb_boost: DEFAULT_CB_BOOST,
        max_rounds: DEFAULT_MAX_ROUNDS,
    }
}
