use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;
use crate::vecmath::Vector;

/// Seeded random stream backed by ChaCha8.
///
/// The generator is keyed by `seed` (expanded with `seed_from_u64`) and uses
/// `stream` as the ChaCha stream id, so `(seed, stream)` fully determines the
/// sequence on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh stream for worker `id`, independent of the parent's position.
    pub fn substream(&self, id: u64) -> Self {
        let stream = splitmix64(self.stream ^ splitmix64(id.wrapping_add(1)));
        Self::new(self.seed, stream)
    }

    pub fn normal<T: Real>(&mut self) -> T {
        let z: f64 = self.rng.sample(StandardNormal);
        T::lit(z)
    }

    /// Vector of i.i.d. standard normal entries.
    pub fn normal_vector<T: Real>(&mut self, dim: usize) -> Vector<T> {
        Vector::from_vec_unchecked((0..dim).map(|_| self.normal()).collect())
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform<T: Real>(&mut self) -> T {
        let u: f64 = self.rng.random();
        T::lit(u)
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, n, k).into_vec()
    }

    pub fn sample_with_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.index(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn substream_ignores_parent_position() {
        let a = RngStream::new(11, 0);
        let mut b = RngStream::new(11, 0);
        b.next_u64();
        assert_eq!(a.substream(5).next_u64(), b.substream(5).next_u64());
        assert_ne!(a.substream(5).next_u64(), a.substream(6).next_u64());
    }

    #[test]
    fn without_replacement_is_distinct() {
        let mut r = RngStream::new(1, 0);
        let mut idx = r.sample_without_replacement(50, 50);
        idx.sort_unstable();
        assert_eq!(idx, (0..50).collect::<Vec<_>>());
    }
}
