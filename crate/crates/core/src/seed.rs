//! Root-seed fan-out: every component draws from its own generator derived
//! from one root seed and a component tag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEED_ENV: &str = "SKETCHSEM_SEED";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn child_seed(root: u64, tag: &str) -> u64 {
    let h = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    splitmix64(root ^ splitmix64(h))
}

pub fn rng_for(root: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(root, tag))
}

/// `SKETCHSEM_SEED` when set and numeric, else `fallback`.
pub fn root_seed(fallback: u64) -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(fallback)
}
