//! Sender-side bandwidth queues, independent loss and latency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::time::SimTime;

use super::latency::LatencyModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthModel {
    pub node_bps: f64,
    pub builder_bps: f64,
}

impl Default for BandwidthModel {
    fn default() -> Self {
        Self {
            node_bps: 25e6,
            builder_bps: 10e9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EndpointCounters {
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub messages_received: u64,
    pub bytes_received: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bytes_sent: u64,
}

/// Point-to-point network between `endpoints()` endpoints; the last one is
/// the builder.
#[derive(Debug, Clone)]
pub struct Network {
    latency: LatencyModel,
    capacity_bps: Vec<f64>,
    busy_until: Vec<SimTime>,
    loss_rate: f64,
    loss_rng: ChaCha8Rng,
    counters: Vec<EndpointCounters>,
    stats: NetStats,
}

impl Network {
    pub fn new(latency: LatencyModel, bandwidth: BandwidthModel, loss_rate: f64, loss_seed: u64) -> Self {
        let endpoints = latency.endpoints();
        let mut capacity_bps = vec![bandwidth.node_bps; endpoints];
        if let Some(last) = capacity_bps.last_mut() {
            *last = bandwidth.builder_bps;
        }
        Self {
            latency,
            capacity_bps,
            busy_until: vec![SimTime::ZERO; endpoints],
            loss_rate,
            loss_rng: ChaCha8Rng::seed_from_u64(loss_seed),
            counters: vec![EndpointCounters::default(); endpoints],
            stats: NetStats::default(),
        }
    }

    pub fn endpoints(&self) -> usize {
        self.capacity_bps.len()
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    /// Time needed to push `bytes` through the uplink of `from`.
    pub fn serialization(&self, from: usize, bytes: usize) -> SimTime {
        SimTime::from_nanos(((bytes as f64 * 8.0) / self.capacity_bps[from] * 1e9).round() as u64)
    }

    /// Queues a message on the sender's uplink. Returns the delivery time,
    /// or `None` if the message is lost. Lost messages still use bandwidth.
    pub fn send(&mut self, from: usize, to: usize, bytes: usize, now: SimTime) -> Option<SimTime> {
        let start = now.max(self.busy_until[from]);
        let done = start + self.serialization(from, bytes);
        self.busy_until[from] = done;
        self.stats.sent += 1;
        self.stats.bytes_sent += bytes as u64;
        let c = &mut self.counters[from];
        c.messages_sent += 1;
        c.bytes_sent += bytes as u64;
        let lost = self.loss_rate > 0.0 && self.loss_rng.gen::<f64>() < self.loss_rate;
        if lost {
            self.stats.dropped += 1;
            return None;
        }
        Some(done + self.latency.one_way(from, to))
    }

    /// Records the arrival of a message previously accepted by `send`.
    pub fn delivered(&mut self, to: usize, bytes: usize) {
        self.stats.delivered += 1;
        let c = &mut self.counters[to];
        c.messages_received += 1;
        c.bytes_received += bytes as u64;
    }

    pub fn counters(&self, endpoint: usize) -> EndpointCounters {
        self.counters[endpoint]
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    /// When the uplink of `endpoint` next becomes idle.
    pub fn busy_until(&self, endpoint: usize) -> SimTime {
        self.busy_until[endpoint]
    }
}
