//! Counter-keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream selected by
//! `(seed, domain, index)`. A sample or replicate therefore depends only on
//! its own index, so parallel or resumed work reproduces serial results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream domains. Distinct domains never share a key.
pub mod domain {
    pub const UNIFORM_SAMPLE: u64 = 0x5341_4d50;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const CDF: u64 = 0x4344_4621;
    pub const C_ORACLE: u64 = 0x434d_4154;
    pub const RIDGE_NOISE: u64 = 0x4e4f_4953;
    pub const RANDOM_DIRECTION: u64 = 0x5744_4952;
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream keyed by `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// One point uniform on `[-1, 1]^m`.
pub fn uniform_point<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Uniform on `[-1, 1]` from a 64-bit hash of arbitrary words.
pub fn hash_unit(words: impl IntoIterator<Item = u64>) -> f64 {
    let h = words
        .into_iter()
        .fold(0x243f_6a88_85a3_08d3u64, |acc, w| splitmix64(acc ^ w));
    // 53 high bits -> [0, 1)
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}

/// Unit vector drawn uniformly on the sphere in `R^m`.
pub fn random_unit_vector(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, domain::RANDOM_DIRECTION, 0);
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}
