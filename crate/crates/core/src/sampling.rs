//! Deterministic, partitioned random sampling.
//!
//! Sample sets are split into fixed-size chunks and every chunk draws from its own
//! ChaCha stream, so results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: usize = 16_384;

pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `f(rng, count)` over `total` samples split into chunks and reduces the
/// per-chunk results in chunk order.
pub fn par_chunks<T, F, R>(seed: u64, total: usize, f: F, identity: T, reduce: R) -> T
where
    T: Send + Clone,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
    R: Fn(T, T) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    let partials: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK.min(total - i * CHUNK);
            let mut rng = chunk_rng(seed, i);
            f(&mut rng, count)
        })
        .collect();
    partials.into_iter().fold(identity, reduce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn reduction_is_independent_of_thread_count() {
        let run = || {
            par_chunks(
                7,
                100_000,
                |rng, n| (0..n).map(|_| rng.random::<f64>()).sum::<f64>(),
                0.0,
                |a, b| a + b,
            )
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool3 = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool1.install(run).to_bits(), pool3.install(run).to_bits());
    }
}
