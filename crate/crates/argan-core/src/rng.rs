//! Deterministic pseudo-random number generation.
//!
//! A single xorshift64* generator is used everywhere in the crate so that a
//! seed fully determines weight initialization, synthetic data, and batch
//! order. The integer stream is identical on every platform.

/// xorshift64* with the standard 2685821657736338717 multiplier.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        // State must be nonzero; fold seed 0 onto an arbitrary odd constant.
        let state = if seed == 0 { 0x9e3779b97f4a7c15 } else { seed };
        Rng { state }
    }

    /// Derive an independent stream for a named purpose, so that consuming
    /// one stream never shifts another (e.g. unlabeled batch draws must not
    /// perturb labeled batch order).
    pub fn substream(seed: u64, salt: u64) -> Self {
        Rng::new(seed ^ salt.wrapping_mul(0xbf58476d1ce4e5b9) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545f4914f6cdd1d)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller (second variate discarded).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(1e-300);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_are_independent() {
        let mut a = Rng::substream(7, 1);
        let mut b = Rng::substream(7, 2);
        let first_b = b.next_u64();
        for _ in 0..100 {
            a.next_u64();
        }
        // Draws from `a` did not advance `b`.
        let mut b2 = Rng::substream(7, 2);
        assert_eq!(first_b, b2.next_u64());
    }

    #[test]
    fn uniform_in_range() {
        let mut r = Rng::new(3);
        for _ in 0..1000 {
            let v = r.uniform(0.3, 0.7);
            assert!((0.3..0.7).contains(&v));
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut r = Rng::new(11);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }
}
