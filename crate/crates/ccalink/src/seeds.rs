//! Deterministic seed derivation for independent Monte-Carlo substreams.
//!
//! Every random draw in a simulation comes from a stream keyed by
//! (master seed, channel-seed index, frame index, purpose), so results do
//! not depend on worker count or on which receivers are enabled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Values are arbitrary but fixed.
pub const CHANNEL: u64 = 0x01;
pub const DATA: u64 = 0x02;
pub const NOISE_CCA: u64 = 0x03;
pub const NOISE_PILOT: u64 = 0x04;
pub const PILOT_VALUES: u64 = 0x05;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a tag path.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0xD6E8_FEB8_6659_FD93);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// Deterministic RNG for a derived stream.
pub fn rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}
