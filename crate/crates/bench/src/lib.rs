//! Fixtures shared by the benchmarks.

use gridwave::{build_design, DelaySequence, DelayTag, FilterBankDesign, Wavelet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cauchy bank with Kronecker delays at `frames` frames.
pub fn design(alpha: f64, m: usize, m_c: usize, d: usize, frames: usize) -> FilterBankDesign {
    let delays = DelaySequence::generate(&DelayTag::Kronecker.kind(), m + 1).expect("delays");
    let wavelet = Wavelet::cauchy(alpha).expect("wavelet");
    build_design(&wavelet, m, m_c, d, d * frames, &delays).expect("design")
}

pub fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
