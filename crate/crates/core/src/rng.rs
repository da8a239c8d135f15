//! Counter-based random substreams.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by the master
//! seed and addressed by `(domain, trial, m, k)`, so trials can be generated
//! in any order or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// What a substream is used for. Distinct domains never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    CommChannel = 1,
    /// Random starting precoders, shared by both design methods.
    PrecoderInit = 2,
}

/// Returns the generator for one `(domain, trial, m, k)` address.
///
/// `trial` uses 32 bits and `m`, `k` 12 bits each.
pub fn substream(seed: u64, domain: Domain, trial: u64, m: usize, k: usize) -> ChaCha8Rng {
    debug_assert!(trial < (1 << 32) && m < (1 << 12) && k < (1 << 12));
    let stream = ((domain as u64) << 56)
        | ((trial & 0xffff_ffff) << 24)
        | (((m as u64) & 0xfff) << 12)
        | ((k as u64) & 0xfff);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
