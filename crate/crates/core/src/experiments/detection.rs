//! Checks on the detection grid: reachability and crossings against
//! enumeration, survival monotonicity and the one-step closing probability.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::CheckCount;
use crate::detection::{
    crossing_exists, detection_schedule, estimate_j_event, j_event_probability, reach_dp, survival_indicators,
    CrossingGeometry, SiteGrid, SiteWindow, SurvivalQuery,
};
use crate::error::Result;
use crate::harness::Runner;
use crate::oracle::{brute_force_crossing, brute_force_survival};
use crate::rng::RandomStream;
use crate::stats::McEstimate;

/// Reachability on random `side × side` grids against path enumeration
/// for jump ranges `0..=3`.
pub fn reach_enumeration(runner: &Runner, seed: u64, experiment: u32, grids: u32, side: i64) -> Result<CheckCount> {
    let per_grid = runner.run(seed, experiment, grids, |mut s| {
        let p = s.uniform_in(0.3, 0.9);
        let g = SiteGrid::from_fn(SiteWindow::new(0, side - 1, 0, side - 1)?, |_, _| s.bernoulli(p))?;
        let start = s.integer_in(0, side - 1);
        Ok((0..=3).filter(|nj| reach_dp(&g, start, *nj).survived() != brute_force_survival(&g, start, *nj)).count() as u64)
    })?;
    Ok(CheckCount::new(4 * u64::from(grids), per_grid.iter().sum()))
}

/// Survival at jump range `N` implies survival at `N + 1` on the same
/// grid, for consecutive entries of `ranges`.
pub fn survival_monotonicity(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    q: &SurvivalQuery,
    ranges: &[u64],
    reps: u32,
) -> Result<CheckCount> {
    let rows = survival_indicators(runner, seed, experiment, q, ranges, reps)?;
    let mut c = CheckCount::default();
    for w in rows.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            c.checks += 1;
            c.failures += u64::from(a.0 && !b.0);
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JEventPoint {
    pub lambda: f64,
    pub r: f64,
    pub closed_form: f64,
    pub estimate: McEstimate,
    /// Within three binomial standard deviations of the closed form.
    pub agrees: bool,
}

/// The closing probability `1 − e^{−2r(λ+1)}` against simulation on every
/// `(λ, r)` pair; pair `i` uses experiment `experiment + i`.
pub fn j_event_grid(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    lambdas: &[f64],
    radii: &[f64],
    reps: u32,
) -> Result<Vec<JEventPoint>> {
    let mut out = Vec::new();
    for lambda in lambdas {
        for r in radii {
            let p = j_event_probability(*lambda, *r)?;
            let estimate = estimate_j_event(runner, seed, experiment + out.len() as u32, *lambda, *r, reps)?;
            let sigma = (p * (1.0 - p) / f64::from(reps)).sqrt();
            out.push(JEventPoint { lambda: *lambda, r: *r, closed_form: p, estimate, agrees: (estimate.mean - p).abs() <= 3.0 * sigma });
        }
    }
    Ok(out)
}

/// The crossing search against enumeration on random grids over the
/// crossing boxes of scale `k = 0` for `l_0 ∈ 2..=max_l0` and of `k = 1` for
/// `l_0 ∈ {2, 3}`, at jump ranges `1, 2, 3, N/2, N` with `N` the box extent
/// plus one.
pub fn crossing_enumeration(seed: u64, max_l0: u32, grids_per_scale: u32) -> Result<CheckCount> {
    let mut s = RandomStream::new(seed, u64::from(u32::MAX) + 2);
    let mut scales: Vec<(u32, u32)> = (2..=max_l0).map(|l0| (l0, 0)).collect();
    scales.extend([(2, 1), (3, 1)]);
    let mut c = CheckCount::default();
    for (l0, k) in scales {
        let rows = detection_schedule(&BigUint::from(l0), k)?;
        let geom = CrossingGeometry::from_row(&rows[k as usize])?;
        let n_max = (geom.extent() + 1) as u64;
        for _ in 0..grids_per_scale {
            let p = s.uniform_in(0.35, 0.85);
            let g = SiteGrid::from_fn(geom.window(), |_, _| s.bernoulli(p))?;
            for range in [1, 2, 3, n_max / 2, n_max] {
                c.checks += 1;
                c.failures += u64::from(crossing_exists(&g, &geom, range)? != brute_force_crossing(&g, &geom, range));
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runner() -> Runner {
        Runner::new(1).unwrap()
    }

    #[test]
    fn reach_agrees_with_enumeration() {
        let c = reach_enumeration(&runner(), 1, 0, 100, 8).unwrap();
        assert_eq!(c, CheckCount::new(400, 0));
    }

    #[test]
    fn survival_grows_with_range() {
        let q = SurvivalQuery { lambda: 1.0, r: 0.4, horizon: 8, half_width: 30 };
        let c = survival_monotonicity(&runner(), 1, 0, &q, &[0, 1, 2, 3], 40).unwrap();
        assert_eq!(c, CheckCount::new(120, 0));
    }

    #[test]
    fn closing_probability_matches() {
        let pts = j_event_grid(&runner(), 1, 0, &[0.5, 2.0], &[0.1, 0.5], 2000).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.agrees), "{pts:?}");
    }

    #[test]
    fn crossing_agrees_with_enumeration() {
        let c = crossing_enumeration(1, 4, 3).unwrap();
        assert_eq!(c.checks, 5 * 3 * 5);
        assert!(c.passed());
    }
}
