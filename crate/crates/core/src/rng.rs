//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(run seed, purpose, agent, stock)`, so the draws one agent makes can never
//! shift the draws of another, whatever the evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    AgentInit = 1,
    Fundamental = 2,
    FundamentalView = 3,
    ForecastPolicy = 4,
    TradePolicy = 5,
    Calibration = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit key of one stream.
pub fn stream_key(seed: u64, purpose: Purpose, agent: u64, stock: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ agent);
    splitmix64(h ^ stock.rotate_left(32))
}

pub fn stream(seed: u64, purpose: Purpose, agent: usize, stock: usize) -> SimRng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, purpose, agent as u64, stock as u64))
}
