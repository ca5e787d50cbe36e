use serde::{Deserialize, Serialize};

use super::{coalescing_walks, on_lattice, Occupancy, OccupancyTable, UniformField, WalkConfig};
use crate::error::{invalid, Result};
use crate::geometry::SpaceTimeBox;
use crate::hammersley::{evolve_particles, sample_box_environment};
use crate::harness::Runner;
use crate::stats::{mc_estimate, McEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhDirection {
    /// Some start has displacement `≥ vH`.
    Upper,
    /// Some start has displacement `≤ vH`.
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentMode {
    Hammersley,
    Dense,
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkExperiment {
    /// `ρ = λ^{−2}`.
    pub rho: f64,
    pub horizon: u32,
    pub walk: WalkConfig,
    pub mode: EnvironmentMode,
    /// Offsets `w` in the unit ℓ¹ ball; defaults to [`default_offsets`].
    #[serde(default = "default_offsets")]
    pub offsets: Vec<(f64, f64)>,
}

/// `(0, 0)` then the points of `{−1, −1/2, 0, 1/2, 1}²` with
/// `|a| + |b| ≤ 1`.
pub fn default_offsets() -> Vec<(f64, f64)> {
    let g = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut out = vec![(0.0, 0.0)];
    for a in g {
        for b in g {
            if f64::abs(a) + f64::abs(b) <= 1.0 && (a, b) != (0.0, 0.0) {
                out.push((a, b));
            }
        }
    }
    out
}

impl WalkExperiment {
    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        if self.mode == EnvironmentMode::Hammersley && !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.horizon == 0 || self.offsets.is_empty() {
            return Err(invalid("horizon and offset list must be non-empty"));
        }
        if self.offsets.iter().any(|(a, b)| a.abs() + b.abs() > 1.0) {
            return Err(invalid("offsets must lie in the unit l1 ball"));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.rho.powf(-0.5)
    }

    /// Start time `⌈w₂⌉` and the lattice sites in `[w₁, w₁ + H)` at that
    /// time.
    fn starts(&self, w: (f64, f64)) -> (i64, Vec<i64>) {
        let n0 = w.1.ceil() as i64;
        let h = f64::from(self.horizon);
        let starts = (w.0.ceil() as i64..)
            .take_while(|x| (*x as f64) < w.0 + h)
            .filter(|x| on_lattice(*x, n0))
            .collect();
        (n0, starts)
    }

    /// Environment box covering every walk from every offset.
    fn environment_box(&self) -> SpaceTimeBox {
        let h = f64::from(self.horizon);
        SpaceTimeBox { x0: -h - 2.5, x1: 2.0 * h + 2.5, t0: -1.0, t1: h + 1.0 }
    }
}

/// Per replicate and offset, the largest and smallest displacement
/// `X_H − x` over the starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSamples {
    pub horizon: u32,
    pub offsets: Vec<(f64, f64)>,
    /// `extremes[rep][offset] = (max, min)`.
    pub extremes: Vec<Vec<(i64, i64)>>,
}

pub fn sample_displacements(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    ex: &WalkExperiment,
    reps: u32,
) -> Result<DisplacementSamples> {
    ex.validate()?;
    let extremes = runner.run(seed, experiment, reps, |s| {
        let occ = match ex.mode {
            EnvironmentMode::Dense => Occupancy::Dense,
            EnvironmentMode::Empty => Occupancy::Empty,
            EnvironmentMode::Hammersley => {
                let bx = ex.environment_box();
                let env = sample_box_environment(&s.fork(0), ex.lambda(), bx)?;
                let h = evolve_particles(&env);
                Occupancy::Hammersley(OccupancyTable::from_history(&h, -1, i64::from(ex.horizon))?)
            }
        };
        let u = UniformField::new(&mut s.fork(1));
        ex.offsets
            .iter()
            .map(|w| {
                let (n0, starts) = ex.starts(*w);
                let clusters = coalescing_walks(&occ, &u, &starts, n0, ex.horizon, &ex.walk)?;
                // the smallest start of a cluster has the largest displacement
                let max = clusters.iter().map(|(p, lo, _)| p - lo).max().expect("at least one start");
                let min = clusters.iter().map(|(p, _, hi)| p - hi).min().expect("at least one start");
                Ok((max, min))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(DisplacementSamples { horizon: ex.horizon, offsets: ex.offsets.clone(), extremes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhEstimate {
    pub direction: PhDirection,
    pub v: f64,
    /// Estimate at the offset with the largest mean.
    pub estimate: McEstimate,
    pub offset: (f64, f64),
    pub per_offset: Vec<f64>,
}

impl DisplacementSamples {
    fn indicator(&self, dir: PhDirection, v: f64, rep: usize, k: usize) -> f64 {
        let (max, min) = self.extremes[rep][k];
        let level = v * f64::from(self.horizon);
        let hit = match dir {
            PhDirection::Upper => max as f64 >= level,
            PhDirection::Lower => min as f64 <= level,
        };
        f64::from(u8::from(hit))
    }

    /// Maximum over offsets of the estimated event probability.
    pub fn estimate(&self, dir: PhDirection, v: f64) -> Result<PhEstimate> {
        if !(-1.0..=1.0).contains(&v) {
            return Err(invalid(format!("speed must be in [-1, 1], got {v}")));
        }
        let mut best: Option<(usize, McEstimate)> = None;
        let mut per_offset = Vec::with_capacity(self.offsets.len());
        for k in 0..self.offsets.len() {
            let xs: Vec<f64> = (0..self.extremes.len()).map(|r| self.indicator(dir, v, r, k)).collect();
            let est = mc_estimate(&xs)?;
            per_offset.push(est.mean);
            if best.as_ref().is_none_or(|(_, b)| est.mean > b.mean) {
                best = Some((k, est));
            }
        }
        let (k, estimate) = best.expect("offsets are non-empty");
        Ok(PhEstimate { direction: dir, v, estimate, offset: self.offsets[k], per_offset })
    }
}

pub fn estimate_ph(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    ex: &WalkExperiment,
    dir: PhDirection,
    v: f64,
    reps: u32,
) -> Result<PhEstimate> {
    sample_displacements(runner, seed, experiment, ex, reps)?.estimate(dir, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBracket {
    pub horizon: u32,
    pub rho: f64,
    /// Largest `v` with lower-event estimate below 1/2.
    pub v_minus: f64,
    /// Smallest `v` with upper-event estimate below 1/2.
    pub v_plus: f64,
    pub tol: f64,
}

/// Bisection on both estimators over `[−1, 1]`, with all evaluations on
/// the same samples.
pub fn speed_bracket(samples: &DisplacementSamples, rho: f64, tol: f64) -> Result<SpeedBracket> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let upper = |v: f64| samples.estimate(PhDirection::Upper, v).map(|e| e.estimate.mean < 0.5);
    let lower = |v: f64| samples.estimate(PhDirection::Lower, v).map(|e| e.estimate.mean < 0.5);
    // smallest v with upper(v) true; upper is monotone false → true
    let v_plus = if upper(-1.0)? {
        -1.0
    } else if !upper(1.0)? {
        1.0
    } else {
        let (mut a, mut b) = (-1.0, 1.0);
        while b - a > tol {
            let m = 0.5 * (a + b);
            if upper(m)? {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    // largest v with lower(v) true; lower is monotone true → false
    let v_minus = if lower(1.0)? {
        1.0
    } else if !lower(-1.0)? {
        -1.0
    } else {
        let (mut a, mut b) = (-1.0, 1.0);
        while b - a > tol {
            let m = 0.5 * (a + b);
            if lower(m)? {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    Ok(SpeedBracket { horizon: samples.horizon, rho, v_minus, v_plus, tol })
}
