//! Seeded random streams.
//!
//! Every consumer derives its own ChaCha8 stream from `(seed, domain, index)`,
//! so results do not depend on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const DOMAIN_ENSEMBLE_INIT: u64 = 1;
pub const DOMAIN_PARTICLE: u64 = 2;
pub const DOMAIN_TRIAL: u64 = 3;
pub const DOMAIN_SNAPSHOT: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `index` of the `domain` family under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
