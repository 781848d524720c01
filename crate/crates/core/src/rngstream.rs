//! Reproducible per-replica random number streams.
//!
//! Every stochastic unit of work (a replica trajectory, a sampler chain)
//! owns a counter-based ChaCha stream derived from the master seed, a
//! stream id, and a short context tag. A trajectory is reproducible from
//! its key alone, independent of worker count or completion order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64; the standard finalizer used to expand seed material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fold_str(tag: &str) -> u64 {
    // FNV-1a over the tag bytes.
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// 256-bit stream key for (master seed, stream id, context).
pub fn stream_key(master_seed: u64, stream_id: u64, context: &str) -> [u8; 32] {
    let mut state = master_seed
        ^ fold_str(context).rotate_left(17)
        ^ stream_id.wrapping_mul(0x9e3779b97f4a7c15);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// A fresh ChaCha8 stream for the given key material.
pub fn stream_rng(master_seed: u64, stream_id: u64, context: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(master_seed, stream_id, context))
}
