//! Fault injection: dead nodes and incomplete views.
//!
//! Both fault kinds are coupled across fractions: with the same seed, the
//! dead set for a smaller fraction is a subset of the dead set for a larger
//! one, and likewise every view shrinks monotonically as the out-of-view
//! fraction grows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::PeerIdx;

use super::derive_seed;

/// `dead[i]` is set for the first `round(fraction · n)` nodes of a seeded
/// random permutation.
pub fn dead_set(n: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let count = ((fraction * n as f64).round() as usize).min(n);
    let mut dead = vec![false; n];
    for &i in &order[..count] {
        dead[i] = true;
    }
    dead
}

/// View of `owner`: every other node whose per-pair uniform draw is at
/// least `fraction`, plus the owner itself.
pub fn view_of(owner: usize, n: usize, fraction: f64, seed: u64) -> Vec<PeerIdx> {
    if fraction <= 0.0 {
        return (0..n as u32).map(PeerIdx).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "view", owner as u64));
    (0..n)
        .filter(|&j| {
            let u: f64 = rng.gen();
            j == owner || u >= fraction
        })
        .map(|j| PeerIdx(j as u32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_sets_are_nested() {
        let fractions = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let sets: Vec<Vec<bool>> = fractions.iter().map(|&f| dead_set(500, f, 11)).collect();
        for (f, s) in fractions.iter().zip(&sets) {
            assert_eq!(s.iter().filter(|&&d| d).count(), (f * 500.0_f64).round() as usize);
        }
        for w in sets.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
        }
    }

    #[test]
    fn views_shrink_with_fraction() {
        let n = 400;
        let small = view_of(3, n, 0.2, 5);
        let large = view_of(3, n, 0.6, 5);
        assert!(large.iter().all(|p| small.contains(p)));
        assert!(small.contains(&PeerIdx(3)) && large.contains(&PeerIdx(3)));
        let frac = 1.0 - large.len() as f64 / n as f64;
        assert!((frac - 0.6).abs() < 0.08, "{frac}");
        assert_eq!(view_of(3, n, 0.0, 5).len(), n);
        assert_ne!(view_of(4, n, 0.5, 5), view_of(3, n, 0.5, 5));
    }
}
