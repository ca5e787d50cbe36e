//! Comparison-lemma sweeps, domination trends and the decoupling inequality
//! over families of box geometries.

use serde::{Deserialize, Serialize};

use super::CheckCount;
use crate::coupling::{
    basic_couple, check_comparison_lemma, decoupling_check, estimate_domination_event, ComparisonOutcome,
    DecouplingReport, DominationQuery, FunctionKind, MonotoneFunctionSpec,
};
use crate::error::Result;
use crate::exp_lpp::{decoupling_check_exp, ExpFunctionKind, ExpFunctionSpec};
use crate::geometry::SpaceTimeBox;
use crate::harness::Runner;
use crate::rng::RandomStream;
use crate::stats::McEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSweep {
    pub samples: u64,
    pub verified: u64,
    pub hypothesis_not_met: u64,
    pub violations: u64,
}

/// The comparison lemma on basic-coupled samples at densities
/// `(lambda_lo, lambda_hi)` on `[0, side]²` with random `a < b` and `t`.
pub fn comparison_sweep(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    lambda_lo: f64,
    lambda_hi: f64,
    side: f64,
    reps: u32,
) -> Result<ComparisonSweep> {
    let bx = SpaceTimeBox::new(0.0, side, 0.0, side)?;
    let outcomes = runner.run(seed, experiment, reps, |mut s| {
        let c = basic_couple(&s.fork(0), lambda_lo, lambda_hi, bx)?;
        let a = s.uniform_in(0.0, side);
        let b = s.uniform_in(a, side);
        let t = s.uniform_in(0.0, side);
        check_comparison_lemma(&c, a, b, t)
    })?;
    let count = |o: ComparisonOutcome| outcomes.iter().filter(|v| **v == o).count() as u64;
    Ok(ComparisonSweep {
        samples: u64::from(reps),
        verified: count(ComparisonOutcome::Verified),
        hypothesis_not_met: count(ComparisonOutcome::HypothesisNotMet),
        violations: count(ComparisonOutcome::Violation),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationTrend {
    pub query: DominationQuery,
    pub times: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// Each estimate is at least the previous one minus twice the joint
    /// standard error.
    pub monotone: bool,
}

/// Domination-event estimates at `t ∈ {T, 2T, 4T}`, each on its own
/// replicate family.
pub fn domination_trend(runner: &Runner, seed: u64, experiment: u32, q: DominationQuery, reps: u32) -> Result<DominationTrend> {
    let times = vec![q.t, 2.0 * q.t, 4.0 * q.t];
    let estimates = times
        .iter()
        .enumerate()
        .map(|(i, t)| estimate_domination_event(runner, seed, experiment + i as u32, DominationQuery { t: *t, ..q }, reps))
        .collect::<Result<Vec<_>>>()?;
    let monotone = estimates
        .windows(2)
        .all(|w| w[1].mean >= w[0].mean - 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt());
    Ok(DominationTrend { query: q, times, estimates, monotone })
}

/// One decoupling geometry for the particle process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleGeometry {
    pub b1: SpaceTimeBox,
    pub b2: SpaceTimeBox,
    pub f1: MonotoneFunctionSpec,
    pub f2: MonotoneFunctionSpec,
}

fn threshold_on(b: SpaceTimeBox, lambda: f64) -> MonotoneFunctionSpec {
    // a level a little above the mean count, so the indicator is neither
    // almost surely 0 nor 1
    let k = (lambda * b.width()).ceil() as u64 + 2;
    MonotoneFunctionSpec {
        kind: FunctionKind::ThresholdCountAtLeast { k },
        interval: (b.x0, b.x1),
        window: (b.t0, b.t1),
        grid: 5,
    }
}

/// `count` geometries with square boxes of side 2 to 4, the second box
/// 6 to 15 time units after the first and shifted horizontally by at most
/// the gap. Generated deterministically from `seed`.
pub fn particle_geometries(seed: u64, count: u32, lambda: f64) -> Result<Vec<ParticleGeometry>> {
    let mut s = RandomStream::new(seed, u64::from(u32::MAX));
    (0..count)
        .map(|_| {
            let w1 = f64::from(s.integer_in(2, 4) as i32);
            let w2 = f64::from(s.integer_in(2, 4) as i32);
            let gap = f64::from(s.integer_in(6, 15) as i32);
            let shift = s.uniform_in(-gap, gap).round();
            let b1 = SpaceTimeBox::new(0.0, w1, 0.0, w1)?;
            let b2 = SpaceTimeBox::new(shift, shift + w2, w1 + gap, w1 + gap + w2)?;
            Ok(ParticleGeometry { b1, b2, f1: threshold_on(b1, lambda), f2: threshold_on(b2, lambda) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSweep<G> {
    pub geometries: Vec<G>,
    pub reports: Vec<DecouplingReport>,
    pub passed: usize,
    pub pass_fraction: f64,
}

impl<G> DecouplingSweep<G> {
    fn new(geometries: Vec<G>, reports: Vec<DecouplingReport>) -> Self {
        let passed = reports.iter().filter(|r| r.pass).count();
        let pass_fraction = passed as f64 / reports.len().max(1) as f64;
        Self { geometries, reports, passed, pass_fraction }
    }
}

/// The decoupling check on every geometry; geometry `i` uses experiment
/// `experiment + i`.
pub fn particle_decoupling_sweep(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    geometries: Vec<ParticleGeometry>,
    lambda: f64,
    lambda_prime: f64,
    reps: u32,
) -> Result<DecouplingSweep<ParticleGeometry>> {
    let reports = geometries
        .iter()
        .enumerate()
        .map(|(i, g)| decoupling_check(runner, seed, experiment + i as u32, &g.f1, &g.f2, g.b1, g.b2, lambda, lambda_prime, reps))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecouplingSweep::new(geometries, reports))
}

/// One decoupling geometry for the lattice model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub f1: ExpFunctionSpec,
    pub f2: ExpFunctionSpec,
}

fn at_most_on(columns: (usize, usize), rows: (usize, usize), alpha: f64) -> ExpFunctionSpec {
    // the mean increment over the columns, scaled down so that a window of
    // a few rows hits with moderate probability
    let level = 0.7 * (columns.1 - columns.0) as f64 / (1.0 - alpha);
    ExpFunctionSpec { kind: ExpFunctionKind::IncrementAtMost { level }, columns, rows }
}

/// `count` geometries with column blocks of width 3 to 6 and row windows of
/// 2 or 3 rows, the second block 6 to 15 rows above the first and shifted
/// by at most the gap.
pub fn lattice_geometries(seed: u64, count: u32, alpha: f64) -> Result<Vec<LatticeGeometry>> {
    let mut s = RandomStream::new(seed, u64::from(u32::MAX) + 1);
    Ok((0..count)
        .map(|_| {
            let w1 = s.integer_in(3, 6) as usize;
            let w2 = s.integer_in(3, 6) as usize;
            let h1 = s.integer_in(1, 2) as usize;
            let h2 = s.integer_in(1, 2) as usize;
            let gap = s.integer_in(6, 15) as usize;
            // keep column indices non-negative by placing the first block at
            // column `gap`
            let c2 = (gap as i64 + s.integer_in(-(gap as i64), gap as i64)) as usize;
            let r2 = h1 + gap;
            LatticeGeometry {
                f1: at_most_on((gap, gap + w1), (0, h1), alpha),
                f2: at_most_on((c2, c2 + w2), (r2, r2 + h2), alpha),
            }
        })
        .collect())
}

pub fn lattice_decoupling_sweep(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    geometries: Vec<LatticeGeometry>,
    alpha: f64,
    alpha_prime: f64,
    reps: u32,
) -> Result<DecouplingSweep<LatticeGeometry>> {
    let reports = geometries
        .iter()
        .enumerate()
        .map(|(i, g)| decoupling_check_exp(runner, seed, experiment + i as u32, &g.f1, &g.f2, alpha, alpha_prime, reps))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecouplingSweep::new(geometries, reports))
}

/// Pathwise checks have no tolerance, so a sweep reduces to a count.
pub fn comparison_checks(sweep: &ComparisonSweep) -> CheckCount {
    CheckCount::new(sweep.verified + sweep.violations, sweep.violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runner() -> Runner {
        Runner::new(1).unwrap()
    }

    #[test]
    fn comparison_sweep_has_no_violations() {
        let r = comparison_sweep(&runner(), 3, 0, 1.0, 1.4, 8.0, 500).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.verified + r.hypothesis_not_met, 500);
        assert!(r.verified > 0 && r.hypothesis_not_met > 0);
        assert_eq!(comparison_checks(&r).failures, 0);
    }

    #[test]
    fn domination_is_more_likely_later() {
        let q = DominationQuery { lambda: 1.0, lambda_prime: 1.5, a: 0.0, b: 1.0, t: 2.0, s: 0.5 };
        let r = domination_trend(&runner(), 3, 0, q, 300).unwrap();
        assert!(r.monotone, "{r:?}");
        assert!(r.estimates[2].mean > r.estimates[0].mean);
    }

    #[test]
    fn geometries_are_separated_and_well_formed() {
        for g in particle_geometries(1, 20, 1.0).unwrap() {
            assert!(g.b1.distance(&g.b2) >= 6.0);
            assert!(g.b1.contains_box(&g.f1.support()) && g.b2.contains_box(&g.f2.support()));
        }
        for g in lattice_geometries(1, 20, 0.5).unwrap() {
            g.f1.validate().unwrap();
            g.f2.validate().unwrap();
            assert!(g.f1.support().distance(&g.f2.support()) >= 6.0);
        }
        assert_eq!(particle_geometries(1, 5, 1.0).unwrap(), particle_geometries(1, 5, 1.0).unwrap());
    }

    #[test]
    fn small_sweeps_pass() {
        let g = particle_geometries(1, 3, 1.0).unwrap();
        let r = particle_decoupling_sweep(&runner(), 1, 0, g, 1.0, 1.1, 400).unwrap();
        assert_eq!(r.reports.len(), 3);
        assert!(r.reports.iter().all(|x| x.f1.mean > 0.02 && x.f1.mean < 0.98), "{r:?}");
        let g = lattice_geometries(1, 3, 0.5).unwrap();
        let r = lattice_decoupling_sweep(&runner(), 1, 0, g, 0.5, 0.45, 400).unwrap();
        assert!(r.reports.iter().all(|x| x.f1.mean > 0.02 && x.f1.mean < 0.98), "{r:?}");
        assert!(r.passed >= 2);
    }
}
