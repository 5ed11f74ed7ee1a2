//! Seed derivation.
//!
//! Child streams are derived with `hash64(parent, index)`: the index is mixed
//! through one SplitMix64 round, xored into the parent, and the result goes
//! through a second SplitMix64 round. Distinct `(parent, index)` pairs give
//! statistically independent ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash64(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used below a run seed. Worker streams use the worker id
/// directly, so tags start far above any realistic worker count.
pub(crate) mod tag {
    pub const INIT: u64 = 1 << 40;
    pub const MINIBATCH: u64 = 1;
    pub const DELAY: u64 = 2;
}
