//! Index-parallel helpers with a sequential fallback.
//!
//! Every sampled sweep in the crate draws sample `i` from its own RNG stream
//! ([`sample_rng`]) and reduces in index order, so results are identical
//! whether the sweep runs on the rayon pool or on the calling thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..n)` and collects in index order. Runs on the rayon pool
/// when `concurrent` is set and the `parallel` feature is enabled.
pub fn map_indexed<T, F>(n: usize, concurrent: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if concurrent {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = concurrent;
    (0..n).map(f).collect()
}

/// Deterministic per-sample generator: stream `index` of the ChaCha8 generator
/// seeded with `seed`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Whether parallel execution is compiled in.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
