//! Deterministic random-number plumbing.
//!
//! All stochastic routines in this crate draw from [`ChaCha8Rng`] streams
//! derived with [`stream`]. A stream is keyed by a user seed plus a list of
//! lane indices (replication number, simulation draw, subsystem tag), so
//! parallel loops can hand each work item its own independent generator and
//! produce bitwise-identical results regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// One step of the splitmix64 sequence; mixes the state and returns a word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha8 stream keyed by `seed` and a chain of lane indices.
///
/// The lanes are folded into a splitmix64 state one at a time, then the
/// sequence is run out to fill the 32-byte ChaCha key. Distinct lane chains
/// give statistically independent streams.
pub fn stream(seed: u64, lanes: &[u64]) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = splitmix64(&mut state);
    for &lane in lanes {
        state ^= lane.wrapping_mul(0xd134_2543_de82_ef95);
        key = splitmix64(&mut state);
    }
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&key.to_le_bytes());
    for chunk in bytes[8..].chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// A derived 64-bit seed for handing a sub-run its own stream family.
pub fn derive_seed(seed: u64, lanes: &[u64]) -> u64 {
    use rand_chacha::rand_core::RngCore;
    stream(seed, lanes).next_u64()
}

/// Uniform draw on `[0, 1)` converted to the working scalar type.
pub fn standard_uniform<T: Real>(rng: &mut impl Rng) -> T {
    T::from_f64_lossy(rng.random::<f64>())
}

/// `n` independent U[0, 1) draws.
pub fn uniforms<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..n).map(|_| standard_uniform(rng)).collect()
}

/// Order statistics of `n` uniforms in a single O(n) pass, no sort.
///
/// Uses the exponential-spacings representation: with `E_1..E_{n+1}` iid
/// standard exponentials and `S_i` their prefix sums, the vector
/// `S_1/S_{n+1}, ..., S_n/S_{n+1}` is distributed exactly as the sorted
/// sample of `n` iid uniforms.
pub fn sorted_uniforms<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    let mut prefix = Vec::with_capacity(n);
    let mut acc = 0.0_f64;
    for _ in 0..n {
        acc -= (1.0 - rng.random::<f64>()).ln();
        prefix.push(acc);
    }
    let total = acc - (1.0 - rng.random::<f64>()).ln();
    prefix
        .into_iter()
        .map(|s| T::from_f64_lossy(s / total))
        .collect()
}
