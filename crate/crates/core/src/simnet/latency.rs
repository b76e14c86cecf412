//! Round-trip latency matrices: synthetic generation and CSV loading.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyTargets {
    pub min_rtt_ms: f64,
    pub mean_rtt_ms: f64,
    pub max_rtt_ms: f64,
}

impl Default for LatencyTargets {
    fn default() -> Self {
        Self {
            min_rtt_ms: 8.0,
            mean_rtt_ms: 64.0,
            max_rtt_ms: 438.0,
        }
    }
}

/// Symmetric RTT matrix between topology vertices, in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyMatrix {
    v: usize,
    rtt: Vec<f32>,
}

impl LatencyMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SimError> {
        let v = rows.len();
        if v == 0 {
            return Err(SimError::Latency("empty latency matrix".into()));
        }
        let mut rtt = Vec::with_capacity(v * v);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != v {
                return Err(SimError::Latency(format!("row {i} has {} entries, expected {v}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                if !(x >= 0.0) || !x.is_finite() || (i != j && x == 0.0) {
                    return Err(SimError::Latency(format!("invalid RTT {x} at ({i}, {j})")));
                }
                rtt.push(x as f32);
            }
        }
        Ok(Self { v, rtt })
    }

    /// Reads a CSV file whose row `i`, column `j` is the RTT in ms between
    /// vertices `i` and `j`.
    pub fn from_csv(path: &Path) -> Result<Self, SimError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| SimError::Latency(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| SimError::Latency(format!("{}: {e}", path.display())))?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| SimError::Latency(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn vertices(&self) -> usize {
        self.v
    }

    #[inline]
    pub fn rtt_ms(&self, a: usize, b: usize) -> f64 {
        self.rtt[a * self.v + b] as f64
    }

    /// Min, mean and max over distinct vertex pairs.
    pub fn stats(&self) -> (f64, f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.v {
            for j in 0..self.v {
                if i != j {
                    let x = self.rtt_ms(i, j);
                    min = min.min(x);
                    max = max.max(x);
                    sum += x;
                    count += 1;
                }
            }
        }
        if count == 0 {
            let x = self.rtt_ms(0, 0);
            return (x, x, x);
        }
        (min, sum / count as f64, max)
    }

    /// Mean RTT of each vertex to all others.
    pub fn vertex_means(&self) -> Vec<f64> {
        (0..self.v)
            .map(|i| {
                let others = (0..self.v).filter(|&j| j != i);
                let total: f64 = others.clone().map(|j| self.rtt_ms(i, j)).sum();
                total / others.count().max(1) as f64
            })
            .collect()
    }
}

/// Generates a matrix hitting the target min, mean and max RTT.
///
/// Vertices get a position in the unit square and an access delay; the raw
/// distance plus both access delays is rescaled to `[0, 1]`, raised to a
/// power chosen by bisection so that the mean matches, and mapped onto
/// `[min, max]`. Pairs on the same vertex use the minimum RTT.
pub fn synth_latency_matrix(targets: &LatencyTargets, vertices: usize, seed: u64) -> Result<LatencyMatrix, SimError> {
    let LatencyTargets {
        min_rtt_ms: lo,
        mean_rtt_ms: mean,
        max_rtt_ms: hi,
    } = *targets;
    if !(lo > 0.0) || !(lo <= mean && mean <= hi) || !hi.is_finite() {
        return Err(SimError::Latency(format!("infeasible RTT targets min {lo}, mean {mean}, max {hi}")));
    }
    if vertices == 0 {
        return Err(SimError::Latency("at least one vertex is required".into()));
    }
    let v = vertices;
    if v == 1 || hi == lo {
        return Ok(LatencyMatrix {
            v,
            rtt: vec![lo as f32; v * v],
        });
    }
    if mean == lo || mean == hi {
        return Err(SimError::Latency(format!(
            "mean {mean} must lie strictly between min {lo} and max {hi} when they differ"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<(f64, f64)> = (0..v).map(|_| (rng.gen(), rng.gen())).collect();
    // skewed access delays produce a few badly connected vertices
    let access: Vec<f64> = (0..v).map(|_| 0.25 * rng.gen::<f64>().powi(3)).collect();
    let mut raw = vec![0.0f64; v * v];
    for i in 0..v {
        for j in 0..v {
            if i != j {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                raw[i * v + j] = (dx * dx + dy * dy).sqrt() + access[i] + access[j];
            }
        }
    }
    let upper = || (0..v).flat_map(move |i| (i + 1..v).map(move |j| i * v + j));
    let rmin = upper().map(|ix| raw[ix]).fold(f64::INFINITY, f64::min);
    let rmax = upper().map(|ix| raw[ix]).fold(0.0, f64::max);
    let span = (rmax - rmin).max(f64::MIN_POSITIVE);
    let unit: Vec<f64> = raw.iter().map(|r| ((r - rmin) / span).clamp(0.0, 1.0)).collect();
    // logs of the positive upper-triangle entries; zeros contribute nothing
    let logs: Vec<f64> = upper().map(|ix| unit[ix]).filter(|&u| u > 0.0).map(f64::ln).collect();
    let pairs = (v * (v - 1) / 2) as f64;
    let target = (mean - lo) / (hi - lo);
    let mean_at = |gamma: f64| logs.iter().map(|l| (gamma * l).exp()).sum::<f64>() / pairs;

    let (mut g_lo, mut g_hi) = (1e-3f64, 1.0f64);
    while mean_at(g_hi) > target {
        g_hi *= 2.0;
        if g_hi > 1e4 {
            return Err(SimError::Latency("cannot reach the requested mean".into()));
        }
    }
    if mean_at(g_lo) < target {
        return Err(SimError::Latency("cannot reach the requested mean".into()));
    }
    for _ in 0..50 {
        let mid = 0.5 * (g_lo + g_hi);
        if mean_at(mid) > target {
            g_lo = mid;
        } else {
            g_hi = mid;
        }
    }
    let gamma = 0.5 * (g_lo + g_hi);
    let rtt = (0..v * v)
        .map(|ix| {
            if ix / v == ix % v {
                lo as f32
            } else {
                (lo + (hi - lo) * unit[ix].powf(gamma)) as f32
            }
        })
        .collect();
    Ok(LatencyMatrix { v, rtt })
}

/// Maps endpoints to vertices; one-way latency is half the RTT.
#[derive(Debug, Clone)]
pub struct LatencyModel {
    matrix: LatencyMatrix,
    vertex_of: Vec<u32>,
}

impl LatencyModel {
    pub fn new(matrix: LatencyMatrix, vertex_of: Vec<u32>) -> Result<Self, SimError> {
        if let Some(&bad) = vertex_of.iter().find(|&&x| x as usize >= matrix.v) {
            return Err(SimError::Latency(format!("vertex {bad} outside a {}-vertex matrix", matrix.v)));
        }
        Ok(Self { matrix, vertex_of })
    }

    /// `nodes` endpoints spread over the vertices, plus a builder placed on
    /// a random vertex among the 20% with the lowest mean RTT. The builder
    /// is the last endpoint.
    pub fn place(matrix: LatencyMatrix, nodes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = matrix.v;
        let mut vertex_of: Vec<u32> = if nodes <= v {
            rand::seq::index::sample(&mut rng, v, nodes).into_iter().map(|x| x as u32).collect()
        } else {
            (0..nodes).map(|_| rng.gen_range(0..v) as u32).collect()
        };
        vertex_of.push(best_quantile_vertex(&matrix, 0.2, &mut rng) as u32);
        Self { matrix, vertex_of }
    }

    pub fn matrix(&self) -> &LatencyMatrix {
        &self.matrix
    }

    pub fn vertex_of(&self, endpoint: usize) -> usize {
        self.vertex_of[endpoint] as usize
    }

    pub fn endpoints(&self) -> usize {
        self.vertex_of.len()
    }

    #[inline]
    pub fn one_way(&self, a: usize, b: usize) -> SimTime {
        let rtt = self.matrix.rtt_ms(self.vertex_of[a] as usize, self.vertex_of[b] as usize);
        SimTime::from_millis(rtt / 2.0)
    }
}

/// Random vertex among the best `fraction` by mean RTT.
pub fn best_quantile_vertex<R: Rng + ?Sized>(matrix: &LatencyMatrix, fraction: f64, rng: &mut R) -> usize {
    let means = matrix.vertex_means();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let keep = ((means.len() as f64 * fraction).ceil() as usize).clamp(1, means.len());
    order[rng.gen_range(0..keep)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn constant_targets_give_constant_matrix() {
        let t = LatencyTargets {
            min_rtt_ms: 10.0,
            mean_rtt_ms: 10.0,
            max_rtt_ms: 10.0,
        };
        let m = synth_latency_matrix(&t, 20, 1).unwrap();
        assert_eq!(m.stats(), (10.0, 10.0, 10.0));
    }

    #[test]
    fn default_targets_are_met() {
        let m = synth_latency_matrix(&LatencyTargets::default(), 400, 7).unwrap();
        let (min, mean, max) = m.stats();
        assert!((min - 8.0).abs() < 0.8, "min {min}");
        assert!((57.6..=70.4).contains(&mean), "mean {mean}");
        assert!((max - 438.0).abs() < 43.8, "max {max}");
        for i in 0..400 {
            for j in 0..400 {
                assert_eq!(m.rtt_ms(i, j), m.rtt_ms(j, i));
                assert!(m.rtt_ms(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let bad = LatencyTargets {
            min_rtt_ms: 50.0,
            mean_rtt_ms: 10.0,
            max_rtt_ms: 100.0,
        };
        assert!(synth_latency_matrix(&bad, 10, 1).is_err());
        let zero = LatencyTargets {
            min_rtt_ms: 0.0,
            ..LatencyTargets::default()
        };
        assert!(synth_latency_matrix(&zero, 10, 1).is_err());
    }

    #[test]
    fn builder_sits_in_best_quantile() {
        let m = synth_latency_matrix(&LatencyTargets::default(), 200, 3).unwrap();
        let means = m.vertex_means();
        let mut sorted = means.clone();
        sorted.sort_by(f64::total_cmp);
        let cutoff = sorted[39];
        for seed in 0..20 {
            let model = LatencyModel::place(m.clone(), 150, seed);
            let b = model.vertex_of(150);
            assert!(means[b] <= cutoff);
        }
    }

    #[test]
    fn one_way_is_half_rtt() {
        let m = LatencyMatrix::from_rows(vec![vec![8.0, 64.0], vec![64.0, 8.0]]).unwrap();
        let model = LatencyModel::new(m, vec![0, 1, 1]).unwrap();
        assert_eq!(model.one_way(0, 1), SimTime::from_millis(32.0));
        assert_eq!(model.one_way(1, 2), SimTime::from_millis(4.0));
    }

    #[test]
    fn csv_round_trip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.5, 20").unwrap();
        writeln!(f, "20, 1.5").unwrap();
        let m = LatencyMatrix::from_csv(f.path()).unwrap();
        assert_eq!(m.vertices(), 2);
        assert_eq!(m.rtt_ms(0, 1), 20.0);
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "1, 2, 3").unwrap();
        assert!(LatencyMatrix::from_csv(g.path()).is_err());
    }
}
