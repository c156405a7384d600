//! Seeded random streams.
//!
//! Every run owns several independent ChaCha streams derived from one seed so
//! that, for example, enabling uniform-resample boundary correction does not
//! perturb the candidate sampling stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// Stream identifiers used inside one run.
pub mod streams {
    pub const SAMPLING: u64 = 1;
    pub const BOUNDARY: u64 = 2;
    pub const RESTART: u64 = 3;
    pub const STEP_SIZE: u64 = 4;
}

pub fn stream(seed: u64, id: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finalizer, used to derive well-spread child seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
