use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::narray::NArray;
use crate::scalar::Real;

/// Full state of a [`SeedStream`], capturable for exact training resumption.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub word_pos: u128,
}

impl RngState {
    pub fn to_bytes(&self) -> [u8; 48] {
        let mut out = [0u8; 48];
        out[..32].copy_from_slice(&self.seed);
        out[32..].copy_from_slice(&self.word_pos.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; 48]) -> Self {
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&bytes[..32]);
        let mut wp = [0u8; 16];
        wp.copy_from_slice(&bytes[32..]);
        RngState {
            seed,
            word_pos: u128::from_le_bytes(wp),
        }
    }
}

/// Deterministic, platform-independent random stream. All randomness in the
/// project flows through one of these, so identical seeds give bit-identical
/// runs and a captured state resumes a run exactly.
#[derive(Clone, Debug)]
pub struct SeedStream {
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent child stream. Advances this stream by one draw.
    pub fn fork(&mut self) -> SeedStream {
        SeedStream::new(self.rng.next_u64())
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.rng.get_seed(),
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(state: &RngState) -> Self {
        let mut rng = ChaCha8Rng::from_seed(state.seed);
        rng.set_word_pos(state.word_pos);
        SeedStream { rng }
    }

    pub fn normal_f64(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn uniform_usize(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Standard normal draws scaled by `std`.
    pub fn normal_array<T: Real>(&mut self, shape: &[usize], std: f64) -> NArray<T> {
        let mut arr = NArray::zeros(shape);
        for v in arr.data_mut() {
            *v = T::from_f64(self.normal_f64() * std);
        }
        arr
    }

    pub fn uniform_array<T: Real>(&mut self, shape: &[usize], lo: f64, hi: f64) -> NArray<T> {
        let mut arr = NArray::zeros(shape);
        for v in arr.data_mut() {
            *v = T::from_f64(self.uniform_f64(lo, hi));
        }
        arr
    }
}
