//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`RandomSource`] identified by
//! `(master_seed, stream_index)`. The pair keys a ChaCha8 generator: the seed
//! fills the key and the index selects the ChaCha stream, so distinct indices
//! give non-overlapping, independent sequences and replicate `i` of an
//! experiment is reproducible no matter which worker runs it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = master_seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Derives an independent source for a nested index (e.g. one parameter
    /// point of an experiment). Depends only on this source's identity, not on
    /// how many draws it has made.
    pub fn derive(&self, index: u64) -> RandomSource {
        let seed = splitmix64(self.master_seed ^ splitmix64(self.stream_index.wrapping_add(1)));
        RandomSource::new(seed, index)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on [lo, hi].
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Exponential with the given rate, by inversion of the CDF.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -(1.0 - self.uniform()).ln() / rate
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.rng.random_range(0..n)
    }

    /// Uniform ordered pair of distinct indices in `0..n`.
    pub fn distinct_pair(&mut self, n: usize) -> (usize, usize) {
        debug_assert!(n >= 2);
        let i = self.index(n);
        let mut j = self.index(n - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Index drawn proportionally to non-negative `weights`.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // rounding: fall back to the last positive weight
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_identity_reproduces_draws() {
        let mut a = RandomSource::new(42, 7);
        let mut b = RandomSource::new(42, 7);
        let xs: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomSource::new(42, 0);
        let mut b = RandomSource::new(42, 1);
        let mut c = RandomSource::new(43, 0);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn derive_ignores_consumed_draws() {
        let a = RandomSource::new(5, 3);
        let mut b = a.clone();
        b.uniform();
        let mut da = a.derive(9);
        let mut db = b.derive(9);
        assert_eq!(da.next_u64(), db.next_u64());
    }

    #[test]
    fn exponential_mean() {
        let mut r = RandomSource::new(1, 0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| r.exponential(4.0)).sum::<f64>() / n as f64;
        // sd of the mean = 0.25 / sqrt(n)
        assert!((m - 0.25).abs() < 4.0 * 0.25 / (n as f64).sqrt());
    }

    #[test]
    fn cross_stream_correlation_is_small() {
        let mut a = RandomSource::new(11, 0);
        let mut b = RandomSource::new(11, 1);
        let n = 100_000;
        let (mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.uniform();
            let y = b.uniform();
            sab += x * y;
            sa += x;
            sb += y;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr {corr}");
    }
}
