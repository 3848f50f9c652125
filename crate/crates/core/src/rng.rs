//! Deterministic random streams keyed by `(master seed, purpose, coordinates)`.
//!
//! Every random draw in a simulation comes from a stream derived from its
//! logical position (replicate, agent, outer iteration, local step), never
//! from a shared generator, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Initialization = 1,
    Batch = 2,
    Data = 3,
    Graph = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a purpose tag and coordinates into a 64-bit seed.
pub fn derive_seed(master: u64, purpose: Purpose, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(purpose as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, coords))
}
