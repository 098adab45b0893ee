//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from one root seed. Child seeds are
//! derived by hashing the root together with a task tag and integer indices,
//! so concurrent schedules cannot change which stream a work item sees. The
//! mixer is SplitMix64 folded over the parts; the tag is absorbed bytewise.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    splitmix(state.wrapping_add(GOLDEN).wrapping_add(word))
}

/// Derive a child seed from `(root, tag, parts)`.
///
/// Identical inputs give identical outputs on every platform; distinct tags or
/// indices give statistically independent streams.
pub fn derive_seed(root: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut state = absorb(root, 0x6d73_6965_7665_0001); // constant domain separator
    for chunk in tag.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        state = absorb(state, u64::from_le_bytes(word));
    }
    state = absorb(state, tag.len() as u64);
    for &p in parts {
        state = absorb(state, p);
    }
    state
}

/// Deterministic generator for a derived seed.
pub fn rng_for(root: u64, tag: &str, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, parts))
}

/// Deterministic generator directly from a seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
