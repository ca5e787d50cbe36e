//! Checks on the walk in the particle environment: the forced-dense speed,
//! pathwise order properties and the trivial ends of the deviation
//! estimator.

use serde::{Deserialize, Serialize};

use super::CheckCount;
use crate::coupling::ordered_couple;
use crate::error::Result;
use crate::geometry::SpaceTimeBox;
use crate::hammersley::evolve_particles;
use crate::harness::Runner;
use crate::rwre::{
    run_walk, sample_displacements, EnvironmentMode, Occupancy, OccupancyTable, PhDirection, UniformField,
    WalkConfig, WalkExperiment,
};
use crate::stats::{mc_estimate, McEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSpeed {
    pub walk: WalkConfig,
    pub horizon: u32,
    /// Mean of `X_H / H`.
    pub estimate: McEstimate,
    /// `2p_occupied − 1`.
    pub expected: f64,
    pub within_three_sigma: bool,
}

/// Walks in the everywhere-occupied environment from the origin.
pub fn dense_speed(runner: &Runner, seed: u64, experiment: u32, walk: WalkConfig, horizon: u32, reps: u32) -> Result<DenseSpeed> {
    let v = runner.run(seed, experiment, reps, |mut s| {
        let u = UniformField::new(&mut s);
        let p = run_walk(&Occupancy::Dense, &u, (0, 0), horizon, &walk)?;
        Ok(p[horizon as usize] as f64 / f64::from(horizon))
    })?;
    let estimate = mc_estimate(&v)?;
    let expected = walk.dense_speed();
    let within_three_sigma = (estimate.mean - expected).abs() <= 3.0 * estimate.stderr;
    Ok(DenseSpeed { walk, horizon, estimate, expected, within_three_sigma })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairChecks {
    /// Walks that meet stay together.
    pub coalescence: CheckCount,
    /// `x ≤ y` at the start implies `X_n ≤ Y_n` for all `n`.
    pub start_order: CheckCount,
    /// The walk in the larger of two ordered environments stays to the
    /// right of the walk in the smaller one.
    pub environment_order: CheckCount,
}

/// `pairs` replicates, each with one ordered pair of environments at
/// densities `(lambda_lo, lambda_hi)` and two starts two to ten sites apart.
/// Needs `p_occupied ≥ p_vacant` for the environment order.
pub fn pathwise_pairs(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    walk: WalkConfig,
    lambda_lo: f64,
    lambda_hi: f64,
    horizon: u32,
    pairs: u32,
) -> Result<PairChecks> {
    let h = f64::from(horizon);
    let bx = SpaceTimeBox { x0: -h - 12.0, x1: h + 12.0, t0: 0.0, t1: h + 1.0 };
    let rows = runner.run(seed, experiment, pairs, |mut s| {
        let c = ordered_couple(&s.fork(0), lambda_lo, lambda_hi, bx)?;
        let table = |e| OccupancyTable::from_history(&evolve_particles(e), 0, i64::from(horizon));
        let (lo, hi) = (Occupancy::Hammersley(table(&c.lo)?), Occupancy::Hammersley(table(&c.hi)?));
        let u = UniformField::new(&mut s.fork(1));
        let gap = 2 * s.integer_in(1, 5);
        let a = run_walk(&lo, &u, (0, 0), horizon, &walk)?;
        let b = run_walk(&lo, &u, (gap, 0), horizon, &walk)?;
        let top = run_walk(&hi, &u, (0, 0), horizon, &walk)?;
        let met = a.iter().zip(&b).position(|(x, y)| x == y);
        let coalesced = met.is_none_or(|m| a[m..] == b[m..]);
        let ordered = a.iter().zip(&b).all(|(x, y)| x <= y);
        let env_ordered = a.iter().zip(&top).all(|(x, y)| x <= y);
        Ok((coalesced, ordered, env_ordered))
    })?;
    let count = |f: fn(&(bool, bool, bool)) -> bool| CheckCount::new(u64::from(pairs), rows.iter().filter(|r| !f(r)).count() as u64);
    Ok(PairChecks {
        coalescence: count(|r| r.0),
        start_order: count(|r| r.1),
        environment_order: count(|r| r.2),
    })
}

/// The upper-deviation estimate at `v = −1` and the lower one at `v = 1`;
/// both events are certain.
pub fn trivial_endpoints(runner: &Runner, seed: u64, experiment: u32, ex: &WalkExperiment, reps: u32) -> Result<(f64, f64)> {
    let s = sample_displacements(runner, seed, experiment, ex, reps)?;
    Ok((s.estimate(PhDirection::Upper, -1.0)?.estimate.mean, s.estimate(PhDirection::Lower, 1.0)?.estimate.mean))
}

/// A small Hammersley walk experiment used for the endpoint check.
pub fn endpoint_experiment(horizon: u32) -> Result<WalkExperiment> {
    Ok(WalkExperiment {
        rho: 1.0,
        horizon,
        walk: WalkConfig::new(0.7, 0.3)?,
        mode: EnvironmentMode::Hammersley,
        offsets: crate::rwre::default_offsets(),
    })
}
