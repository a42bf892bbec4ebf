//! Counter-based seed derivation.
//!
//! Every random stream in the toolkit is a ChaCha8 generator seeded from
//! `derive_seed(master, tags)`. The tags identify the consumer (stream kind,
//! year, network index, seed bank), so a stream never depends on the order in
//! which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream kind tags. Distinct kinds never share a stream even for equal
/// remaining tags.
pub mod kind {
    pub const SYNTH: u64 = 0x5359_4e54;
    pub const RECONSTRUCT: u64 = 0x5245_434f;
    pub const CONTAGION: u64 = 0x434f_4e54;
    pub const ORACLE: u64 = 0x4f52_4143;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Folds `tags` into `master` one at a time:
/// `h₀ = mix(master ⊕ φ)`, `hₖ₊₁ = mix(hₖ ⊕ mix(tagₖ + (k+1)·φ))`.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    for (k, &tag) in tags.iter().enumerate() {
        let salt = GOLDEN.wrapping_mul(k as u64 + 1);
        h = mix64(h ^ mix64(tag.wrapping_add(salt)));
    }
    h
}

pub fn stream(master: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, tags))
}

/// Years may be negative in principle; map them onto tags without collisions.
#[inline]
pub fn year_tag(year: i32) -> u64 {
    year as i64 as u64
}
