//! Seeded, named random streams.
//!
//! Every source of randomness in the crate derives from a single `u64`
//! experiment seed. A stream is addressed by a string label plus an index;
//! distinct (label, index) pairs yield statistically independent generators.
//! Training, evaluation, and k-selection use distinct labels, so results from
//! one phase never depend on how much randomness another phase consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, used only to spread stream labels across the key space.
fn fnv1a(bytes: &[u8], basis: u64) -> u64 {
    let mut h = basis;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Generator for stream `label` with the given per-item index.
///
/// The label selects a 256-bit ChaCha key derived from the seed; the index
/// selects the ChaCha stream within that key, so batches can hand each item
/// its own generator without coordination.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label.as_bytes(), 0xcbf2_9ce4_8422_2325).to_le_bytes());
    key[16..24].copy_from_slice(&fnv1a(label.as_bytes(), 0x9ae1_6a3b_2f90_404f).to_le_bytes());
    key[24..32].copy_from_slice(&(label.len() as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
