//! Seeded random streams.
//!
//! Every exogenous draw (spawns, task arrivals, channel shadowing, speed
//! re-draws) comes from its own ChaCha stream keyed by `(seed, stream, slot,
//! entity)`. Draws therefore never depend on the order in which a policy
//! touches the world, which gives common random numbers across policies and
//! lets the oracle predictor read future realizations without disturbing the
//! run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Spawn = 1,
    Tasks = 2,
    Shadowing = 3,
    Burst = 4,
    SpeedRedraw = 5,
    Placement = 6,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn stream_rng(seed: u64, stream: Stream, slot: u64, entity: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    h = splitmix(h ^ stream as u64);
    h = splitmix(h ^ slot);
    h = splitmix(h ^ entity);
    ChaCha8Rng::seed_from_u64(h)
}
