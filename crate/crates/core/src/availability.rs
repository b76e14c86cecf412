//! Sampling mathematics: the false-positive bound, sample-count selection
//! and withholding patterns.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::erasure;
use crate::grid::{CellIndex, GridParams};

pub const DEFAULT_SAMPLES: usize = 73;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AvailabilityError {
    #[error("{s} samples exceed the {max} cells outside the withheld square")]
    TooManySamples { s: usize, max: usize },
    #[error("target probability {0} cannot be reached")]
    UnreachableTarget(f64),
    #[error("expected {expected} anchor {what}, got {got}")]
    AnchorCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("anchor index {index} out of range for n = {n}")]
    AnchorOutOfRange { index: u16, n: usize },
    #[error("cannot draw {s} distinct cells out of {cells}")]
    SampleOverflow { s: usize, cells: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingParams {
    pub s: usize,
    pub n: usize,
    pub k: usize,
}

impl SamplingParams {
    pub fn new(s: usize, grid: &GridParams) -> Self {
        Self {
            s,
            n: grid.n,
            k: grid.k,
        }
    }

    fn withheld(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    fn cells(&self) -> usize {
        self.n * self.n
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLES, &GridParams::default())
    }
}

/// Natural log of the bound, accumulated factor by factor.
fn log_bound(p: &SamplingParams) -> f64 {
    let w = p.withheld() as f64;
    let total = p.cells();
    (0..p.s)
        .map(|i| (-w / (total - i) as f64).ln_1p())
        .sum()
}

/// Probability that `s` distinct uniform samples all miss a maximal
/// withheld square: `prod_{i<s} (1 - (k+1)^2 / (n^2 - i))`.
pub fn false_positive_bound(p: &SamplingParams) -> Result<f64, AvailabilityError> {
    let max = p.cells().saturating_sub(p.withheld());
    if p.s > max {
        return Err(AvailabilityError::TooManySamples { s: p.s, max });
    }
    Ok(log_bound(p).exp())
}

/// Smallest sample count whose bound is at most `target`.
pub fn min_samples_for(target: f64, n: usize, k: usize) -> Result<usize, AvailabilityError> {
    if !(target > 0.0) {
        return Err(AvailabilityError::UnreachableTarget(target));
    }
    if target >= 1.0 {
        return Ok(0);
    }
    let total = n * n;
    let w = ((k + 1) * (k + 1)) as f64;
    let max = total.saturating_sub((k + 1) * (k + 1));
    let mut log_acc = 0.0f64;
    for s in 1..=max {
        log_acc += (-w / (total - (s - 1)) as f64).ln_1p();
        if log_acc.exp() <= target {
            return Ok(s);
        }
    }
    Err(AvailabilityError::UnreachableTarget(target))
}

/// Cells a builder refuses to publish.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WithholdingPattern {
    pub withheld: BTreeSet<CellIndex>,
}

impl WithholdingPattern {
    /// Everything the builder does publish.
    pub fn available(&self, params: &GridParams) -> Vec<CellIndex> {
        let n = params.n as u16;
        (0..n)
            .flat_map(|r| (0..n).map(move |c| CellIndex::new(r, c)))
            .filter(|c| !self.withheld.contains(c))
            .collect()
    }

    /// An attack pattern is effective when what remains cannot be decoded.
    pub fn is_effective(&self, params: &GridParams) -> bool {
        !erasure::reconstructable(self.available(params), params)
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        self.withheld.contains(&cell)
    }
}

/// The largest withholding that still prevents reconstruction: the
/// `(k+1) × (k+1)` cross product of the anchors.
pub fn max_withholding_pattern(
    anchor_rows: &BTreeSet<u16>,
    anchor_cols: &BTreeSet<u16>,
    params: &GridParams,
) -> Result<WithholdingPattern, AvailabilityError> {
    for (what, set) in [("rows", anchor_rows), ("columns", anchor_cols)] {
        if set.len() != params.k + 1 {
            return Err(AvailabilityError::AnchorCount {
                what,
                expected: params.k + 1,
                got: set.len(),
            });
        }
        if let Some(&bad) = set.iter().find(|&&i| i as usize >= params.n) {
            return Err(AvailabilityError::AnchorOutOfRange { index: bad, n: params.n });
        }
    }
    let withheld = anchor_rows
        .iter()
        .flat_map(|&r| anchor_cols.iter().map(move |&c| CellIndex::new(r, c)))
        .collect();
    Ok(WithholdingPattern { withheld })
}

/// Draws `s` distinct cells uniformly from `rng`.
pub fn sample_cells<R: Rng + ?Sized>(rng: &mut R, p: &SamplingParams) -> Vec<CellIndex> {
    rand::seq::index::sample(rng, p.cells(), p.s)
        .into_iter()
        .map(|f| CellIndex::from_flat(f, p.n))
        .collect()
}

/// `s` distinct uniformly random cells, reproducible from `seed`.
pub fn random_sample_set(seed: u64, p: &SamplingParams) -> Result<BTreeSet<CellIndex>, AvailabilityError> {
    if p.s > p.cells() {
        return Err(AvailabilityError::SampleOverflow { s: p.s, cells: p.cells() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(sample_cells(&mut rng, p).into_iter().collect())
}
