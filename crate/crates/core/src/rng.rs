//! Seeded randomness shared by samplers, generators and randomized checks.
//!
//! ChaCha8 is used everywhere so that a seed produces the same stream on every
//! platform and across `rand` releases.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub type SeededRng = ChaCha8Rng;

/// Seed used by the CLI when neither `--seed` nor `OPQSO_SEED` is given.
pub const DEFAULT_SEED: u64 = 20240101;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent per-task seed (SplitMix64 finalizer over base and index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw from the open simplex of dimension `n` (Dirichlet(1, ..., 1)).
pub fn dirichlet_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            // Exp1 can return exactly 0 with negligible probability
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Dirichlet weights with every coordinate lifted to at least `floor`.
pub fn floored_weights<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    assert!(n as f64 * floor < 1.0, "floor too large for {n} coordinates");
    let free = 1.0 - n as f64 * floor;
    dirichlet_uniform(rng, n)
        .into_iter()
        .map(|w| floor + free * w)
        .collect()
}

/// `amount` distinct values from `1..=upper`, sorted.
pub fn distinct_indices<R: Rng + ?Sized>(rng: &mut R, upper: usize, amount: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = sample(rng, upper, amount.min(upper))
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picked.sort_unstable();
    picked
}
