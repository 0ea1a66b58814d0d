//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha8 stream from a root seed and
//! a stage label: the stream seed is the first 32 bytes of
//! `SHA-256(root_seed as little-endian u64 || label as UTF-8)`. Labels are plain
//! strings such as `"gen-data/realization/3"`, so adding a stage never perturbs
//! the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream_seed(root: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    seed
}

pub fn stream(root: u64, label: &str) -> StreamRng {
    ChaCha8Rng::from_seed(stream_seed(root, label))
}

/// A 64-bit child seed, for APIs that take a `u64` seed.
pub fn child_seed(root: u64, label: &str) -> u64 {
    let s = stream_seed(root, label);
    u64::from_le_bytes(s[..8].try_into().unwrap())
}
