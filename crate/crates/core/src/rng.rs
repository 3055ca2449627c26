//! Counter-based random streams.
//!
//! Every random quantity is addressed by `(master seed, domain, index)`: the
//! seed and domain form the ChaCha key, the index selects the stream. Workers
//! can therefore reproduce any realization without coordinating.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Disorder fields: index = realization, word position = 2 × site.
pub const DOMAIN_DISORDER: u64 = 0;
/// Auxiliary choices made per realization by probes (offsets, times).
pub const DOMAIN_AUX: u64 = 1;
/// Poisson reference points.
pub const DOMAIN_SYNTHETIC: u64 = 2;
/// Generated trace-inequality cases.
pub const DOMAIN_LEMMA: u64 = 3;

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
