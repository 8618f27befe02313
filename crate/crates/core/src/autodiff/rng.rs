//! Seeded randomness.
//!
//! The generator is ChaCha8 (`rand_chacha`), whose output stream is fixed by
//! its specification and therefore identical on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        idx
    }

    /// Keep-mask where each entry is kept with probability `1 - rate`.
    pub fn bernoulli_keep_mask(&mut self, n: usize, rate: f64) -> Vec<bool> {
        if rate <= 0.0 {
            return vec![true; n];
        }
        (0..n).map(|_| self.uniform() >= rate).collect()
    }

    pub fn normal_vec<T: Scalar>(&mut self, n: usize, std: f64) -> Vec<T> {
        (0..n).map(|_| T::of(self.normal() * std)).collect()
    }

    pub fn uniform_vec<T: Scalar>(&mut self, n: usize, bound: f64) -> Vec<T> {
        (0..n)
            .map(|_| T::of(self.uniform_range(-bound, bound)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::seeded(42);
        let mut b = RngState::seeded(42);
        let xs: Vec<f64> = (0..1000).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..1000).map(|_| b.uniform()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.normal().to_bits(), b.normal().to_bits());
    }

    #[test]
    fn permutation_contains_each_index_once() {
        let mut r = RngState::seeded(1);
        let mut p = r.permutation(3);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2]);
    }

    #[test]
    fn zero_rate_keeps_everything() {
        let mut r = RngState::seeded(9);
        assert!(r.bernoulli_keep_mask(100, 0.0).into_iter().all(|k| k));
    }

    #[test]
    fn keep_fraction_within_three_sigma() {
        let mut r = RngState::seeded(2024);
        let n = 100_000;
        for rate in [0.1, 0.3, 0.5] {
            let kept = r
                .bernoulli_keep_mask(n, rate)
                .iter()
                .filter(|&&k| k)
                .count() as f64
                / n as f64;
            let sigma = (rate * (1.0 - rate) / n as f64).sqrt();
            assert!(
                (kept - (1.0 - rate)).abs() <= 3.0 * sigma,
                "rate {rate}: kept {kept}"
            );
        }
    }
}
