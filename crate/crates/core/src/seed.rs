//! Stable seed derivation.
//!
//! Every random stream in the toolkit is derived from a user seed plus a
//! label, so streams never depend on evaluation order or on the Rust
//! release (std's `DefaultHasher` is not guaranteed stable).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from `seed` and a list of label parts.
pub fn derive_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

/// Seed for one video of a batch run.
pub fn video_seed(seed: u64, video_id: &str) -> u64 {
    derive_seed(seed, &[b"video", video_id.as_bytes()])
}

pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[label.as_bytes()]))
}

pub fn indexed_stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[label.as_bytes(), &index.to_le_bytes()]))
}

/// SplitMix64 finalizer. Used as a counter-based generator: the value for
/// counter `i` under key `seed` is `mix64(seed ^ mix64(i))`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in `[0, 1)` for counter `index` under `seed`.
pub fn counter_uniform(seed: u64, index: u64) -> f64 {
    let bits = mix64(seed ^ mix64(index));
    // top 53 bits -> exact dyadic rational in [0, 1)
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
