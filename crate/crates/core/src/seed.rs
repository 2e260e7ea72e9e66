//! Deterministic seed derivation.
//!
//! Every random component draws its generator from a master seed, a
//! component name and an index, so runs replay exactly and parallel jobs do
//! not share streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a; stable across platforms and compiler versions.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ name_hash(component)) ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, component: &str, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, component, index))
}
