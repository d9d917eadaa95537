use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One ChaCha stream per link process, all keyed by the same seed.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Number of Bernoulli(`p`) trials up to and including the first success,
/// by inversion of the geometric CDF.
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64, SimError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(SimError::InvalidProbability(p));
    }
    if p == 1.0 {
        return Ok(1);
    }
    let u: f64 = Open01.sample(rng);
    let k = (u.ln() / (-p).ln_1p()).ceil();
    Ok(if k < 1.0 { 1 } else if k >= u64::MAX as f64 { u64::MAX } else { k as u64 })
}
