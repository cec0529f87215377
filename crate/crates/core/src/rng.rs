//! Seed derivation. Every random stream in a run is keyed by the master seed,
//! a purpose tag, and an index, so streams never alias each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Permutation = 2,
    Shuffle = 3,
    Reinit = 4,
    Probe = 5,
    Subsample = 6,
}

/// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    mix(mix(master ^ mix(stream as u64)) ^ index)
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
