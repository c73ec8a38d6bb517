//! Deterministic RNG streams.
//!
//! Every stochastic stage draws from a ChaCha stream addressed by a
//! (seed, stream id) pair. Streams are independent, so cascade `i` sees
//! the same randomness no matter how many cascades are simulated, in what
//! order, or on which thread. Reserved stream ids:
//!
//! * `STREAM_DEGREES`: degree-sequence sampling
//! * `STREAM_WIRING`:  configuration-model stub matching and rewiring
//! * `STREAM_RATES`:   transmission-rate draws
//! * `STREAM_CASCADE_BASE + id`: cascade `id` (seeds, mixture, simulation)
//! * `STREAM_RESTART_BASE + k`:  parameter init of optimizer restart `k`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_DEGREES: u64 = 0;
pub const STREAM_WIRING: u64 = 1;
pub const STREAM_RATES: u64 = 2;
pub const STREAM_RESTART_BASE: u64 = 1 << 20;
pub const STREAM_CASCADE_BASE: u64 = 1 << 32;

/// ChaCha generator positioned on `stream_id` of `seed`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stateless splitmix64 mix, used to derive per-replicate sub-seeds from a
/// base seed without correlating neighbouring replicates.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
