//! Seeded random streams.
//!
//! Every stochastic generator in the crate draws from a
//! [`Xoshiro256PlusPlus`] stream identified by a `(seed, stream)` pair.
//! The pair is folded into the 64-bit generator seed with two SplitMix64
//! rounds, so streams are reproducible across runs and platforms and can be
//! regenerated independently (a measurement row never depends on how many
//! other rows were drawn before it).
//!
//! Stream ids in use:
//!
//! | stream            | consumer                                  |
//! |-------------------|-------------------------------------------|
//! | `0..p`            | row `i` of a random measurement matrix     |
//! | [`SELECTION`]     | single-pixel index selection               |
//! | [`NOISE`]         | additive measurement noise                 |
//! | [`FORCING`]       | Gaussian input excitation                  |
//! | [`LIFTING`]       | random lifting-mode magnitudes             |
//! | [`AUXILIARY`]     | anything else (probes, planted vectors)    |
//!
//! Ensembles derive the seed of realization `k` as `master + k`
//! (wrapping), see [`realization_seed`].

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

pub const SELECTION: u64 = u64::MAX;
pub const NOISE: u64 = u64::MAX - 1;
pub const FORCING: u64 = u64::MAX - 2;
pub const LIFTING: u64 = u64::MAX - 3;
pub const AUXILIARY: u64 = u64::MAX - 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    StreamRng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

pub fn realization_seed(master: u64, realization: u64) -> u64 {
    master.wrapping_add(realization)
}
