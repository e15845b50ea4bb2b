//! Deterministic seed derivation. Every random stream in the pipeline is a
//! ChaCha8 generator keyed by the run seed plus a purpose tag and indices,
//! so results never depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_BANK: u64 = 0x6261_6e6b;
pub(crate) const TAG_REG: u64 = 0x7265_6775;
pub(crate) const TAG_SHUFFLE: u64 = 0x7368_7566;
pub(crate) const TAG_INIT: u64 = 0x696e_6974;
pub(crate) const TAG_SURFACE: u64 = 0x7375_7266;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
