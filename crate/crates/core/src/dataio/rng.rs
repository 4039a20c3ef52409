//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 stream whose 32-byte
//! key is `SHA-256(seed_le ‖ tag ‖ index_le*)`. Streams for different purposes
//! or indices are independent, and no draw depends on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn key(seed: u64, tag: &str, indices: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    h.finalize().into()
}

pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(seed, tag, indices))
}

/// A child seed, for handing a derived seed to an API that takes one.
pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    u64::from_le_bytes(key(seed, tag, indices)[..8].try_into().unwrap())
}
