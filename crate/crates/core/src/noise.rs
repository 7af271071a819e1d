//! Counter-based Gaussian noise.
//!
//! Every draw is a pure function of `(seed, counter, dim)`: the seed keys a
//! ChaCha block cipher and the counter selects its stream, so any step of any
//! run can be regenerated independently of execution order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Counter reserved for the initialisation draw of a run. Step counters
/// start at zero and never reach it.
pub const INIT_COUNTER: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub counter: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn at(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    /// Standard normal vector for the current counter, without advancing.
    pub fn peek(&self, dim: usize) -> Vec<f64> {
        standard_normal(self.seed, self.counter, dim)
    }

    /// Standard normal vector for the current counter; advances the counter.
    pub fn next_gaussian(&mut self, dim: usize) -> Vec<f64> {
        let v = self.peek(dim);
        self.counter += 1;
        v
    }
}

pub fn standard_normal(seed: u64, counter: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// SplitMix64 finaliser, used to derive well-separated seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(mix_seed(parent), |acc, b| mix_seed(acc ^ u64::from(b)))
}
