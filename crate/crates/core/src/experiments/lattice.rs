//! Checks on the stationary exponential corner-growth model.

use serde::{Deserialize, Serialize};

use super::CheckCount;
use crate::error::Result;
use crate::exp_lpp::{exp_exit_point, lpp_times, sample_grid};
use crate::harness::Runner;
use crate::oracle::{brute_force_exp_exit, brute_force_exp_lpp};
use crate::stats::{ks_one_sample, mc_estimate, KsResult, McEstimate};

/// Passage times and exit points at every cell of random `side × side`
/// weight sets against path enumeration. Cell `(i, j)` is the far corner of
/// the `(i+1) × (j+1)` grid, so every smaller grid is covered.
pub fn enumeration_check(runner: &Runner, seed: u64, experiment: u32, grids: u32, side: usize) -> Result<CheckCount> {
    let per_grid = runner.run(seed, experiment, grids, |mut s| {
        let alpha = s.uniform_in(0.1, 0.9);
        let (i_max, j_max) = (side - 1, side - 1);
        let grid = sample_grid(&mut s.fork(0), alpha, i_max, j_max)?;
        let g = lpp_times(&grid);
        let mut c = CheckCount::default();
        for i in 0..=i_max {
            for j in 0..=j_max {
                c.checks += 2;
                // both sides sum the same weights along one path, so equal
                // maxima are bit-identical
                c.failures += u64::from(g.get(i, j)? != brute_force_exp_lpp(&grid, i, j));
                c.failures += u64::from(exp_exit_point(&g, i, j)? != brute_force_exp_exit(&grid, i, j));
            }
        }
        Ok(c)
    })?;
    Ok(per_grid.into_iter().fold(CheckCount::default(), CheckCount::merge))
}

/// One row increment `G(i+1, n) − G(i, n)` per independent grid, with
/// `i = n = side/2`, tested against Exp(1−α).
pub fn increment_law(runner: &Runner, seed: u64, experiment: u32, alpha: f64, side: usize, reps: u32) -> Result<KsResult> {
    let mid = side / 2;
    let w = runner.run(seed, experiment, reps, |mut s| {
        let g = lpp_times(&sample_grid(&mut s, alpha, side, side)?);
        g.increment(mid, mid, mid + 1)
    })?;
    ks_one_sample(&w, |x| if x <= 0.0 { 0.0 } else { -(-(1.0 - alpha) * x).exp_m1() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageMean {
    pub alpha: f64,
    pub side: usize,
    pub estimate: McEstimate,
    /// `side/α + side/(1−α)`.
    pub expected: f64,
    pub within_three_sigma: bool,
}

/// `E[G(side, side)]` against `side/α + side/(1−α)`.
pub fn passage_mean(runner: &Runner, seed: u64, experiment: u32, alpha: f64, side: usize, reps: u32) -> Result<PassageMean> {
    let v = runner.run(seed, experiment, reps, |mut s| {
        let grid = sample_grid(&mut s, alpha, side, side)?;
        Ok(*crate::exp_lpp::top_row(&grid).last().expect("non-empty row"))
    })?;
    let estimate = mc_estimate(&v)?;
    let n = side as f64;
    let expected = n / alpha + n / (1.0 - alpha);
    let within_three_sigma = (estimate.mean - expected).abs() <= 3.0 * estimate.stderr;
    Ok(PassageMean { alpha, side, estimate, expected, within_three_sigma })
}
