//! Seeded, reproducible random streams. Each replication index gets its own
//! ChaCha stream derived from the master seed, so results do not depend on
//! how replications are scheduled over threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicationRng = ChaCha8Rng;

/// The master stream for `seed`.
pub fn seeded(seed: u64) -> ReplicationRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> ReplicationRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
