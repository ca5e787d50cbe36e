//! Random walk on the parity lattice driven by Hammersley's process.
//!
//! From `(x, n)` the walk steps to `x + 1` when `U(x, n) ≤ p`, else to
//! `x − 1`, where `p = p_occupied` if a particle sits in `(x − 1/2, x + 1/2)`
//! at time `n` and `p = p_vacant` otherwise. All walks read the same uniforms,
//! so they coalesce on meeting and never cross.

mod estimate;
mod schedule;

pub use estimate::{
    default_offsets, estimate_ph, EnvironmentMode, sample_displacements, speed_bracket, DisplacementSamples, PhDirection, PhEstimate,
    SpeedBracket, WalkExperiment,
};
pub use schedule::{rwre_schedule, ScheduleRow, ScheduleTable};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_domain, Result};
use crate::hammersley::ParticleHistory;
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    /// Right-step probability next to a particle.
    pub p_occupied: f64,
    /// Right-step probability with no particle nearby.
    pub p_vacant: f64,
}

impl WalkConfig {
    pub fn new(p_occupied: f64, p_vacant: f64) -> Result<Self> {
        let c = Self { p_occupied, p_vacant };
        c.validate()?;
        Ok(c)
    }

    /// Both probabilities in `(0, 1)`. The degenerate value 1 is accepted
    /// too, for deterministic checks.
    pub fn validate(&self) -> Result<()> {
        for p in [self.p_occupied, self.p_vacant] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("step probability must be in (0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn dense_speed(&self) -> f64 {
        2.0 * self.p_occupied - 1.0
    }
}

/// Whether `(x, n)` is a vertex of the lattice `{x ≡ n mod 2}`.
pub fn on_lattice(x: i64, n: i64) -> bool {
    (x - n).rem_euclid(2) == 0
}

/// One uniform per lattice vertex, derived from the vertex coordinates
/// alone: the same vertex gives the same value whatever region is queried.
#[derive(Clone, Debug)]
pub struct UniformField {
    key: [u8; 32],
}

impl UniformField {
    pub fn new(s: &mut RandomStream) -> Self {
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&s.next_u64().to_le_bytes());
        }
        Self { key }
    }

    pub fn value(&self, x: i64, n: i64) -> Result<f64> {
        if !on_lattice(x, n) {
            return Err(invalid(format!("({x}, {n}) is not a lattice vertex")));
        }
        let (xi, ni) = match (i32::try_from(x), i32::try_from(n)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(out_of_domain(format!("vertex ({x}, {n}) outside the keyed range"))),
        };
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((u64::from(xi as u32) << 32) | u64::from(ni as u32));
        Ok((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
    }
}

/// Particle positions at integer times, for `η_n(I_x)` queries.
#[derive(Clone, Debug)]
pub struct OccupancyTable {
    n_lo: i64,
    x_range: (f64, f64),
    rows: Vec<Vec<f64>>,
}

impl OccupancyTable {
    /// Configurations at times `n_lo..=n_hi`; an event at an integer time
    /// has already happened at that time.
    pub fn from_history(h: &ParticleHistory, n_lo: i64, n_hi: i64) -> Result<Self> {
        let bx = h.bx();
        if (n_lo as f64) < bx.t0 || (n_hi as f64) >= bx.t1 || n_lo > n_hi {
            return Err(out_of_domain(format!("times {n_lo}..={n_hi} outside history {bx:?}")));
        }
        let mut cursor = h.cursor();
        let rows = (n_lo..=n_hi)
            .map(|n| {
                cursor.advance_to(n as f64);
                cursor.configuration().positions.clone()
            })
            .collect();
        Ok(Self { n_lo, x_range: (bx.x0, bx.x1), rows })
    }

    pub fn occupied(&self, x: i64, n: i64) -> Result<bool> {
        let c = x as f64;
        if c - 0.5 < self.x_range.0 || c + 0.5 > self.x_range.1 {
            return Err(out_of_domain(format!("site {x} outside the environment")));
        }
        let row = usize::try_from(n - self.n_lo)
            .ok()
            .and_then(|i| self.rows.get(i))
            .ok_or_else(|| out_of_domain(format!("time {n} outside the environment")))?;
        let i = row.partition_point(|p| *p <= c - 0.5);
        Ok(i < row.len() && row[i] < c + 0.5)
    }
}

/// What the walk sees.
#[derive(Clone, Debug)]
pub enum Occupancy {
    Hammersley(OccupancyTable),
    /// Every site occupied.
    Dense,
    /// No site occupied.
    Empty,
}

impl Occupancy {
    pub fn occupied(&self, x: i64, n: i64) -> Result<bool> {
        match self {
            Occupancy::Hammersley(t) => t.occupied(x, n),
            Occupancy::Dense => Ok(true),
            Occupancy::Empty => Ok(false),
        }
    }
}

/// Position after one step from `(x, n)`.
pub fn step(occ: &Occupancy, u: &UniformField, cfg: &WalkConfig, x: i64, n: i64) -> Result<i64> {
    let p = if occ.occupied(x, n)? { cfg.p_occupied } else { cfg.p_vacant };
    Ok(if u.value(x, n)? <= p { x + 1 } else { x - 1 })
}

/// Positions `X_0, …, X_H` of the walk started at lattice vertex `w`.
pub fn run_walk(occ: &Occupancy, u: &UniformField, w: (i64, i64), horizon: u32, cfg: &WalkConfig) -> Result<Vec<i64>> {
    cfg.validate()?;
    if !on_lattice(w.0, w.1) {
        return Err(invalid(format!("start {w:?} is not a lattice vertex")));
    }
    let mut path = Vec::with_capacity(horizon as usize + 1);
    let mut x = w.0;
    path.push(x);
    for m in 0..i64::from(horizon) {
        x = step(occ, u, cfg, x, w.1 + m)?;
        path.push(x);
    }
    Ok(path)
}

/// Walks from every start in `starts` (same time `n0`, sorted, lattice
/// vertices) for `horizon` steps, merging walks that meet. Returns, per
/// surviving cluster, `(final position, smallest start, largest start)`.
pub fn coalescing_walks(
    occ: &Occupancy,
    u: &UniformField,
    starts: &[i64],
    n0: i64,
    horizon: u32,
    cfg: &WalkConfig,
) -> Result<Vec<(i64, i64, i64)>> {
    cfg.validate()?;
    if starts.windows(2).any(|w| w[0] >= w[1]) || starts.iter().any(|x| !on_lattice(*x, n0)) {
        return Err(invalid("starts must be increasing lattice vertices at one time"));
    }
    let mut clusters: Vec<(i64, i64, i64)> = starts.iter().map(|x| (*x, *x, *x)).collect();
    for m in 0..i64::from(horizon) {
        let mut next: Vec<(i64, i64, i64)> = Vec::with_capacity(clusters.len());
        for (pos, lo, hi) in &clusters {
            let p = step(occ, u, cfg, *pos, n0 + m)?;
            match next.last_mut() {
                Some(last) if last.0 == p => last.2 = *hi,
                Some(last) if last.0 > p => {
                    return Err(invalid(format!("walks crossed at time {}: {} then {p}", n0 + m + 1, last.0)));
                }
                _ => next.push((p, *lo, *hi)),
            }
        }
        clusters = next;
    }
    Ok(clusters)
}
