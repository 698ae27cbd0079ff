//! Seeded, named random streams.
//!
//! Every stochastic operation draws from a stream addressed by a master seed,
//! a purpose tag, and a list of context tags (item ids, instance indices,
//! call counters). Streams with different addresses never share draws, so
//! score estimation, solver evaluation, and test evaluation stay
//! statistically independent while remaining bit-reproducible for a fixed
//! seed across platforms and runs.
//!
//! Stream addresses are hashed into a 256-bit key with a SplitMix64 chain and
//! the key feeds a ChaCha8 generator. Uniform doubles take the top 53 bits of
//! a `u64` draw; bounded indices use Lemire's multiply-shift rejection method.
//! Nothing here consults platform entropy or global state.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer used to combine seed material.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What a stream's draws are consumed for. Distinct purposes never share
/// draws even when the remaining context tags coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Training samples feeding score estimation.
    Estimation = 1,
    /// Joint realizations used to compare candidate sets inside a solver.
    Evaluation = 2,
    /// Held-out realizations used to evaluate final solver outputs.
    TestEval = 3,
    /// Synthetic instance generation (means, costs).
    Generation = 4,
    /// Marginal-gain estimation inside the lazy value-oracle greedy.
    CelfGain = 5,
    /// Final comparison of the two lazy greedy passes.
    CelfCompare = 6,
    /// Monte Carlo utility estimates for sketch sandwich verification.
    Sandwich = 7,
    /// Train/test splitting of empirical samples.
    Split = 8,
    /// Sampled curvature estimation.
    Curvature = 9,
    /// Diminishing-returns property probing.
    DrCheck = 10,
    /// Randomized invariant fuzzing.
    Fuzz = 11,
}

/// Master seed. Cheap to copy; all streams and child seeds derive from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// Derive an independent child seed, e.g. one per instance in a sweep.
    pub fn derive(self, tag: u64) -> Seed {
        Seed(mix(self.0 ^ mix(tag)))
    }

    /// Open the named stream for `purpose` under context `tags`.
    pub fn stream(self, purpose: Purpose, tags: &[u64]) -> StreamRng {
        let mut h = mix(self.0);
        h = mix(h ^ purpose as u64);
        for &t in tags {
            h = mix(h ^ t);
        }
        h = mix(h ^ tags.len() as u64);
        let mut key = [0u8; 32];
        let mut s = h;
        for chunk in key.chunks_exact_mut(8) {
            s = mix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        StreamRng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }
}

/// One deterministic random stream. Never shared between threads; each
/// concurrent task opens its own stream address.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1); rejects the (2^-53 probability) zero.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased uniform index in `0..n` (Lemire's method).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        let n = n as u64;
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_draws() {
        let seed = Seed(42);
        let a: Vec<u64> = (0..8).map({
            let mut s = seed.stream(Purpose::Estimation, &[7]);
            move |_| s.next_u64()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut s = seed.stream(Purpose::Estimation, &[7]);
            move |_| s.next_u64()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn purposes_and_tags_separate_streams() {
        let seed = Seed(42);
        let a = seed.stream(Purpose::Estimation, &[7]).next_u64();
        let b = seed.stream(Purpose::Evaluation, &[7]).next_u64();
        let c = seed.stream(Purpose::Estimation, &[8]).next_u64();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    // Frozen reference draws: guards the documented cross-platform
    // reproducibility contract against accidental generator changes.
    #[test]
    fn golden_draws_stay_fixed() {
        let mut s = Seed(1).stream(Purpose::Estimation, &[0]);
        let got: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        assert_eq!(got, vec![7591981968599748087, 1401086559324558053, 7687120126883970364]);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = Seed(3).stream(Purpose::Fuzz, &[]);
        for _ in 0..1000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn index_unbiased_smoke() {
        let mut s = Seed(5).stream(Purpose::Fuzz, &[]);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            counts[s.index(7)] += 1;
        }
        for &c in &counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "counts {counts:?}");
        }
    }
}
