//! Workload generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` values drawn uniformly from `[0, 2^40)`.
pub fn random_array(n: usize, seed: u64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..1 << 40)).collect()
}

/// `count` random 1-based windows `(a, b)` with `a <= b <= n`.
pub fn random_windows(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..count)
        .map(|_| {
            let (a, b) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
            (a.min(b), a.max(b))
        })
        .collect()
}
