//! Deterministic random streams.
//!
//! Every replica gets its own seed from a counter-based mix of
//! `(master_seed, replica_index)`, and inside a replica the initial
//! configuration and the dynamics draw from separate ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INITIAL_STREAM: u64 = 0;
const DYNAMICS_STREAM: u64 = 1;
const AUX_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index`, independent of scheduling order.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream used for sampling the initial configuration.
pub fn initial_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, INITIAL_STREAM)
}

/// Stream used for the jump process.
pub fn dynamics_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, DYNAMICS_STREAM)
}

/// Stream for anything else (Gaussian samplers, Monte Carlo checks).
pub fn aux_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, AUX_STREAM)
}
