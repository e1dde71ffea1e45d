//! Deterministic stream seeding.
//!
//! Every Monte Carlo draw in this crate is a pure function of (seed, index):
//! draw i of a batch uses `stream_rng(seed, i)`, so results are identical for
//! any worker count or scheduling order. Distinct purposes within one run
//! derive their own seeds through `child_seed` with a string tag.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; bijective on u64, scrambles adjacent counters apart.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `seed`; what `stream_rng` seeds with.
pub fn compose(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}

/// RNG for stream `index` under `seed`. Independent of all other indices.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(compose(seed, index))
}

/// Seed for a named sub-purpose (observed data vs draws vs noise, ...).
pub fn child_seed(seed: u64, tag: &str) -> u64 {
    let mut h = mix(seed);
    for &b in tag.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    h
}
