//! Seed derivation. Every random stream in the stack is a `ChaCha8Rng`
//! seeded from a base seed plus a stream tag, so that episodes and
//! enumeration boxes can be processed in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_POLICY: u64 = 1;
pub const STREAM_SENSOR: u64 = 2;
pub const STREAM_DISTURBANCE: u64 = 3;
pub const STREAM_WORLD: u64 = 4;
pub const STREAM_VERIFY: u64 = 5;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(mix64(base) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn stream(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

/// Seed for a box, derived from its bounds so that it does not depend on the
/// order in which boxes are visited.
pub fn box_seed(base: u64, lo: &[f64], hi: &[f64]) -> u64 {
    let mut h = mix64(base ^ 0x5EED);
    for v in lo.iter().chain(hi) {
        h = mix64(h ^ v.to_bits());
    }
    h
}
