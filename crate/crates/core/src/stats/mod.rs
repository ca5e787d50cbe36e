//! Monte-Carlo aggregation, goodness-of-fit tests and Poisson tail bounds.

mod gof;
mod tails;

pub use gof::{
    chi_square_poisson, kolmogorov_sf, ks_one_sample, ks_two_sample, ChiSquareResult, KsResult,
};
pub use tails::{
    chernoff_exponent, chernoff_g, chernoff_h, poisson_tail_bound, poisson_tail_exact, TailSide,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum with a fixed binary reduction tree, so the result depends only on the
/// order of the input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Some replicates hit a truncation boundary.
    pub censored: bool,
    pub censored_fraction: f64,
    /// The parameters sit below the threshold from which the checked
    /// statement is asserted.
    pub below_threshold: bool,
    pub outside_parameter_range: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator) over `√reps`.
    pub stderr: f64,
    pub reps: usize,
    pub ci95: (f64, f64),
    pub flags: EstimateFlags,
}

impl McEstimate {
    fn from_moments(mean: f64, stderr: f64, reps: usize) -> Self {
        Self {
            mean,
            stderr,
            reps,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
            flags: EstimateFlags::default(),
        }
    }

    pub fn with_flags(mut self, flags: EstimateFlags) -> Self {
        self.flags = flags;
        self
    }
}

pub fn mc_estimate(samples: &[f64]) -> Result<McEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mean = pairwise_sum(samples) / n as f64;
    let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Ok(McEstimate::from_moments(mean, (var / n as f64).sqrt(), n))
}

/// Estimate of a probability from indicator outcomes.
pub fn mc_estimate_bools(outcomes: &[bool]) -> Result<McEstimate> {
    let v: Vec<f64> = outcomes.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    mc_estimate(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let e = mc_estimate(&[3.5; 10]).unwrap();
        assert_eq!(e.mean, 3.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.ci95, (3.5, 3.5));
    }

    #[test]
    fn two_point_sample() {
        // sd with n - 1 is sqrt(0.5), stderr sqrt(0.5)/sqrt(2) = 0.5
        let e = mc_estimate(&[0.0, 1.0]).unwrap();
        assert_eq!(e.mean, 0.5);
        assert!((e.stderr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            mc_estimate(&[1.0]),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn uniform_mean() {
        let mut s = RandomStream::new(9, 9);
        let v: Vec<f64> = (0..100_000).map(|_| s.uniform()).collect();
        let e = mc_estimate(&v).unwrap();
        let sigma = (1.0f64 / 12.0 / 1e5).sqrt();
        assert!((e.mean - 0.5).abs() < 3.0 * sigma);
        assert!((e.stderr - sigma).abs() < 0.05 * sigma);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }
}
