//! Seeded, counter-based random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from `(seed, stream)`, so the
//! draws of one component never shift those of another and parallel runs stay reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_DATA: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_INIT: u64 = 3;
pub const STREAM_NOISE: u64 = 4;
pub const STREAM_TRIGGER: u64 = 5;
pub const STREAM_DIAG: u64 = 6;
/// Epoch `e` shuffles with stream `STREAM_EPOCH_BASE + e`.
pub const STREAM_EPOCH_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
