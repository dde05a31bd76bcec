//! Counter-based derivation of independent RNG streams.
//!
//! Every random quantity in the crate draws from a ChaCha stream keyed by
//! (user seed, domain string, index tuple), so results are reproducible and
//! independent of evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    *state = z ^ (z >> 31);
}

/// Mix seed, domain and indices into a 32-byte ChaCha key.
pub fn stream_seed(seed: u64, domain: &str, indices: &[u64]) -> [u8; 32] {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    for &b in domain.as_bytes() {
        state ^= u64::from(b);
        splitmix64(&mut state);
    }
    for &ix in indices {
        state ^= ix;
        splitmix64(&mut state);
    }
    let mut key = [0_u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        splitmix64(&mut state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Deterministic RNG for the given (seed, domain, indices) stream.
pub fn stream_rng(seed: u64, domain: &str, indices: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_seed(seed, domain, indices))
}
