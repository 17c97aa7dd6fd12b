//! Splittable replicate streams.
//!
//! Replicate r of an experiment draws from stream r of a counter-based
//! ChaCha generator keyed by the master seed. Stream derivation is
//! stateless — worker threads never share generator state — so any parallel
//! schedule produces the same draws for the same (master seed, replicate)
//! pair, and distinct replicates get statistically independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator for replicate `replicate` under `master_seed`.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}
