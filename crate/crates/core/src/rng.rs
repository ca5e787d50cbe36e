//! Seeded, counter-based random streams.
//!
//! A [`RandomStream`] is a ChaCha8 keystream. The 256-bit key holds the
//! experiment seed plus a short fork lineage, and the 64-bit ChaCha stream
//! selector holds the stream id. Nothing is re-seeded through a hash chain,
//! so replicate `r` of experiment `e` can be generated in any order (or in
//! parallel) and still produce the same draws.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

const MAX_LINEAGE: usize = 6;

/// Packs `(experiment, replicate)` into a stream id. Injective over the full
/// `u32 × u32` range.
pub fn replicate_stream_id(experiment: u32, replicate: u32) -> u64 {
    (u64::from(experiment) << 32) | u64::from(replicate)
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    lineage: [u32; MAX_LINEAGE],
    depth: usize,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::with_lineage(seed, stream_id, [0; MAX_LINEAGE], 0)
    }

    /// Stream for replicate `replicate` of experiment `experiment`.
    pub fn for_replicate(seed: u64, experiment: u32, replicate: u32) -> Self {
        Self::new(seed, replicate_stream_id(experiment, replicate))
    }

    fn with_lineage(seed: u64, stream_id: u64, lineage: [u32; MAX_LINEAGE], depth: usize) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        for (i, label) in lineage.iter().enumerate() {
            key[8 + 4 * i..12 + 4 * i].copy_from_slice(&label.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            lineage,
            depth,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream that is disjoint from its parent and from every child
    /// with a different label. The parent's position is not consulted, so
    /// forks are stable no matter how many draws the parent has made.
    ///
    /// Panics when the lineage is deeper than six forks.
    pub fn fork(&self, label: u32) -> RandomStream {
        assert!(self.depth < MAX_LINEAGE, "fork lineage deeper than {MAX_LINEAGE}");
        assert!(label != u32::MAX, "fork label u32::MAX is reserved");
        let mut lineage = self.lineage;
        lineage[self.depth] = label + 1;
        Self::with_lineage(self.seed, self.stream_id, lineage, self.depth + 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn integer_in(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.uniform() * span as f64).floor().min((span - 1) as f64) as i64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(-self.uniform_open().ln() / rate)
    }

    /// Poisson draw. Sequential inversion below mean 30, Hörmann's
    /// transformed rejection (PTRS) above; both are exact.
    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(invalid(format!("poisson mean must be non-negative, got {mean}")));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        if mean < 30.0 {
            Ok(self.poisson_inversion(mean))
        } else {
            Ok(self.poisson_ptrs(mean))
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            if next == cdf {
                // remaining mass is below double resolution
                break;
            }
            cdf = next;
        }
        k
    }

    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let smu = mean.sqrt();
        let b = 0.931 + 2.53 * smu;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        let log_mean = mean.ln();
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mean + k * log_mean - ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

/// Reads `(experiment, replicate)` back out of a stream id.
pub fn split_stream_id(stream_id: u64) -> (u32, u32) {
    ((stream_id >> 32) as u32, stream_id as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_id_reproduce() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn zero_seed_is_valid() {
        let mut s = RandomStream::new(0, 0);
        let u = s.uniform();
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn neighbouring_ids_are_uncorrelated() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 4);
        let n = 100_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.uniform();
            let y = b.uniform();
            sa += x;
            sb += y;
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let n = n as f64;
        let cov = sab / n - (sa / n) * (sb / n);
        let corr = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
        assert!(corr.abs() < 0.01, "corr = {corr}");
    }

    #[test]
    fn forks_are_stable_and_distinct() {
        let mut parent = RandomStream::new(1, 2);
        let before = parent.fork(5).uniform();
        parent.uniform();
        assert_eq!(before.to_bits(), parent.fork(5).uniform().to_bits());
        assert_ne!(parent.fork(5).uniform().to_bits(), parent.fork(6).uniform().to_bits());
        assert_ne!(parent.fork(0).uniform().to_bits(), parent.clone().uniform().to_bits());
    }

    #[test]
    fn stream_id_packing_round_trips() {
        assert_eq!(split_stream_id(replicate_stream_id(17, 99)), (17, 99));
        assert_ne!(replicate_stream_id(1, 0), replicate_stream_id(0, 1));
    }

    #[test]
    fn exponential_means() {
        for (rate, expected) in [(1.0, 1.0), (4.0, 0.25)] {
            let mut s = RandomStream::new(11, rate as u64);
            let n = 100_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let x = s.exponential(rate).unwrap();
                assert!(x > 0.0);
                sum += x;
            }
            let mean = sum / n as f64;
            // sd of Exp(rate) is 1/rate
            let sigma = expected / (n as f64).sqrt();
            assert!((mean - expected).abs() < 3.0 * sigma, "rate {rate}: {mean}");
        }
    }

    #[test]
    fn exponential_rejects_bad_rates() {
        let mut s = RandomStream::new(0, 0);
        assert!(s.exponential(0.0).is_err());
        assert!(s.exponential(-1.0).is_err());
        assert!(s.poisson(-0.5).is_err());
    }

    #[test]
    fn poisson_moments_both_regimes() {
        for mean in [0.3, 5.0, 29.5, 30.0, 120.0] {
            let mut s = RandomStream::new(3, (mean * 10.0) as u64);
            let n = 50_000;
            let draws: Vec<f64> = (0..n).map(|_| s.poisson(mean).unwrap() as f64).collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (mean / n as f64).sqrt();
            assert!((m - mean).abs() < 4.0 * se, "mean {mean}: {m}");
            assert!((v / mean - 1.0).abs() < 0.05, "var {mean}: {v}");
        }
    }
}
