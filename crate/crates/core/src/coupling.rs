//! Couplings of Hammersley realizations at two densities, the comparison
//! and domination checks built on them, and the Monte-Carlo check of the
//! sprinkled decoupling inequality.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::SpaceTimeBox;
use crate::hammersley::{
    check_lambda, evolve_particles, exit_point, sample_boundary, sample_box_environment, sample_clocks,
    BoxEnvironment, LppField, ParticleHistory,
};
use crate::harness::Runner;
use crate::points::PointSet1D;
use crate::rng::RandomStream;
use crate::stats::{mc_estimate, mc_estimate_bools, EstimateFlags, McEstimate};

const CLOCK_FORK: u32 = 0;
const LOW_FORK: u32 = 1;
const HIGH_FORK: u32 = 2;
const THINNING_FORK: u32 = 3;

/// Two environments on one box that share their clocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledEnvironments {
    pub lo: BoxEnvironment,
    pub hi: BoxEnvironment,
}

fn check_densities(lambda_lo: f64, lambda_hi: f64) -> Result<()> {
    check_lambda(lambda_lo)?;
    check_lambda(lambda_hi)?;
    if lambda_lo >= lambda_hi {
        return Err(Error::Precondition(format!(
            "need lambda_lo < lambda_hi, got {lambda_lo} and {lambda_hi}"
        )));
    }
    Ok(())
}

/// Basic coupling: shared clocks, boundary data at the two densities drawn
/// independently.
pub fn basic_couple(s: &RandomStream, lambda_lo: f64, lambda_hi: f64, bx: SpaceTimeBox) -> Result<CoupledEnvironments> {
    check_densities(lambda_lo, lambda_hi)?;
    bx.validate()?;
    let clocks = sample_clocks(&s.fork(CLOCK_FORK), bx)?;
    let (src_lo, snk_lo) = sample_boundary(&s.fork(LOW_FORK), lambda_lo, bx)?;
    let (src_hi, snk_hi) = sample_boundary(&s.fork(HIGH_FORK), lambda_hi, bx)?;
    Ok(CoupledEnvironments {
        lo: BoxEnvironment::from_parts(lambda_lo, bx, src_lo, snk_lo, clocks.clone()),
        hi: BoxEnvironment::from_parts(lambda_hi, bx, src_hi, snk_hi, clocks),
    })
}

fn thin(points: &PointSet1D, keep: f64, s: &mut RandomStream) -> Result<PointSet1D> {
    let kept = points.coords().iter().copied().filter(|_| s.bernoulli(keep)).collect();
    PointSet1D::from_coords(kept, points.window())
}

/// Ordered coupling: the low-density sources are a thinning of the
/// high-density sources and the high-density sinks are a thinning of the
/// low-density sinks, so the low configuration starts inside the high one
/// and every particle leaving the high system also leaves the low one.
pub fn ordered_couple(s: &RandomStream, lambda_lo: f64, lambda_hi: f64, bx: SpaceTimeBox) -> Result<CoupledEnvironments> {
    check_densities(lambda_lo, lambda_hi)?;
    bx.validate()?;
    let keep = lambda_lo / lambda_hi;
    let clocks = sample_clocks(&s.fork(CLOCK_FORK), bx)?;
    let (src_hi, _) = sample_boundary(&s.fork(HIGH_FORK), lambda_hi, bx)?;
    let (_, snk_lo) = sample_boundary(&s.fork(LOW_FORK), lambda_lo, bx)?;
    let mut th = s.fork(THINNING_FORK);
    let src_lo = thin(&src_hi, keep, &mut th)?;
    let snk_hi = thin(&snk_lo, keep, &mut th)?;
    Ok(CoupledEnvironments {
        lo: BoxEnvironment::from_parts(lambda_lo, bx, src_lo, snk_lo, clocks.clone()),
        hi: BoxEnvironment::from_parts(lambda_hi, bx, src_hi, snk_hi, clocks),
    })
}

/// Whether every particle of `lo` in `(a, b]` is also a particle of `hi`
/// (same position) at time `t` and at every event time in `(t, t + s]`.
/// For configurations of distinct points this is the same as
/// `lo((x, y]) ≤ hi((x, y])` for all `(x, y] ⊆ (a, b]`.
pub fn dominated_on(lo: &ParticleHistory, hi: &ParticleHistory, a: f64, b: f64, t: f64, s: f64) -> Result<bool> {
    let mut times: Vec<f64> = lo.event_times(t, t + s).chain(hi.event_times(t, t + s)).filter(|u| *u > t).collect();
    times.push(t);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cl = lo.cursor();
    let mut ch = hi.cursor();
    for u in times {
        cl.advance_to(u);
        ch.advance_to(u);
        let hp = &ch.configuration().positions;
        let ok = cl
            .configuration()
            .positions
            .iter()
            .filter(|p| a < **p && **p <= b)
            .all(|p| hp.binary_search_by(|q| q.total_cmp(p)).is_ok());
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonOutcome {
    HypothesisNotMet,
    Verified,
    Violation,
}

/// Checks the comparison lemma on one coupled sample: if the low-density
/// exit point at `(b, t)` is at most the high-density exit point at
/// `(a, t)`, then `L_lo(y) − L_lo(x) ≤ L_hi(y) − L_hi(x)` for all
/// `a ≤ x < y ≤ b`. Equivalently `L_hi − L_lo` is non-decreasing on
/// `[a, b]`; it is evaluated at `a`, `b`, a grid, and every position where
/// either field can jump.
pub fn check_comparison_lemma(c: &CoupledEnvironments, a: f64, b: f64, t: f64) -> Result<ComparisonOutcome> {
    if a > b {
        return Err(invalid(format!("need a <= b, got a={a}, b={b}")));
    }
    let bx = c.lo.bx();
    if !(bx.contains(a, t) && bx.contains(b, t)) {
        return Err(Error::OutOfDomain(format!("({a}..{b}, {t}) outside {bx:?}")));
    }
    if a == b {
        return Ok(ComparisonOutcome::Verified);
    }
    let z_lo = exit_point(&c.lo, b, t)?.z;
    let z_hi = exit_point(&c.hi, a, t)?.z;
    if z_lo > z_hi {
        return Ok(ComparisonOutcome::HypothesisNotMet);
    }
    const GRID: usize = 64;
    let mut xs: Vec<f64> = (0..=GRID).map(|i| a + (b - a) * i as f64 / GRID as f64).collect();
    let inside = |x: &f64| a <= *x && *x <= b;
    xs.extend(c.lo.sources().coords().iter().filter(|x| inside(x)));
    xs.extend(c.hi.sources().coords().iter().filter(|x| inside(x)));
    xs.extend(c.lo.clocks().points().iter().filter(|p| p.1 <= t).map(|p| p.0).filter(inside));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let lo = LppField::new(&c.lo, true).values_at_time(t, &xs)?;
    let hi = LppField::new(&c.hi, true).values_at_time(t, &xs)?;
    let diff: Vec<i64> = lo.iter().zip(&hi).map(|(l, h)| *h as i64 - *l as i64).collect();
    if diff.windows(2).all(|w| w[0] <= w[1]) {
        Ok(ComparisonOutcome::Verified)
    } else {
        Ok(ComparisonOutcome::Violation)
    }
}

/// Parameters of one domination-event estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationQuery {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub s: f64,
}

impl DominationQuery {
    pub fn epsilon(&self) -> f64 {
        self.lambda.powi(-2) - self.lambda_prime.powi(-2)
    }

    /// Time from which the lemma asserts its bound.
    pub fn threshold(&self) -> f64 {
        4.0 / self.epsilon() * (self.b - self.a + self.s * self.lambda.powi(-2))
    }

    /// `ε ∈ (0, 3/2·λ'^{-2})`.
    pub fn in_parameter_range(&self) -> bool {
        let eps = self.epsilon();
        eps > 0.0 && eps < 1.5 * self.lambda_prime.powi(-2)
    }

    /// The simulated box: `[a − margin, b] × [0, t + s]`. The margin puts the
    /// characteristic exit positions of both densities well inside the
    /// bottom edge, where the finite-box coupling agrees with the coupling
    /// on the whole line.
    pub fn simulation_box(&self) -> Result<SpaceTimeBox> {
        let horizon = self.t + self.s;
        let margin = 2.0 * horizon * self.lambda.powi(-2) + 10.0;
        SpaceTimeBox::new(self.a - margin, self.b, 0.0, horizon)
    }
}

/// Monte-Carlo estimate of the probability that the λ configuration is
/// dominated by the λ' configuration on `(a, b]` throughout `[t, t + s]`
/// under the basic coupling. Threshold and parameter-range violations are
/// reported in the flags.
pub fn estimate_domination_event(runner: &Runner, seed: u64, experiment: u32, q: DominationQuery, reps: u32) -> Result<McEstimate> {
    check_densities(q.lambda, q.lambda_prime)?;
    if !(q.a < q.b) || !(q.t >= 0.0) || !(q.s >= 0.0) {
        return Err(invalid(format!("need a < b, t >= 0, s >= 0: {q:?}")));
    }
    if reps < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: reps as usize });
    }
    let bx = q.simulation_box()?;
    let hits = runner.run(seed, experiment, reps, |s| {
        let c = basic_couple(&s, q.lambda, q.lambda_prime, bx)?;
        let lo = evolve_particles(&c.lo);
        let hi = evolve_particles(&c.hi);
        dominated_on(&lo, &hi, q.a, q.b, q.t, q.s)
    })?;
    let flags = EstimateFlags {
        below_threshold: q.t <= q.threshold(),
        outside_parameter_range: !q.in_parameter_range(),
        ..EstimateFlags::default()
    };
    Ok(mc_estimate_bools(&hits)?.with_flags(flags))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
    /// Both; only constant functions.
    Either,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionKind {
    /// 1 if at some grid time the interval holds at least `k` particles.
    ThresholdCountAtLeast { k: u64 },
    /// 1 if at some grid time the interval holds at most `k` particles.
    ThresholdCountAtMost { k: u64 },
    /// `min(max count over grid times, k) / k`.
    MaxOverWindow { k: u64 },
    Constant { value: f64 },
}

/// A [0, 1]-valued monotone function of the particle trajectory, supported
/// on `(x_lo, x_hi] × [t_lo, t_hi]` and observed at `grid` equally spaced
/// times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRecord", into = "FunctionRecord")]
pub struct MonotoneFunctionSpec {
    pub kind: FunctionKind,
    pub interval: (f64, f64),
    pub window: (f64, f64),
    pub grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindName {
    ThresholdCountAtLeast,
    ThresholdCountAtMost,
    MaxOverWindow,
    Constant,
}

/// Flat declarative form used in configuration files.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionRecord {
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    interval: (f64, f64),
    window: (f64, f64),
    #[serde(default = "default_grid")]
    grid: usize,
}

fn default_grid() -> usize {
    11
}

impl TryFrom<FunctionRecord> for MonotoneFunctionSpec {
    type Error = String;

    fn try_from(r: FunctionRecord) -> std::result::Result<Self, String> {
        let need_k = || r.k.ok_or_else(|| format!("{:?} needs k", r.kind));
        let kind = match r.kind {
            KindName::ThresholdCountAtLeast => FunctionKind::ThresholdCountAtLeast { k: need_k()? },
            KindName::ThresholdCountAtMost => FunctionKind::ThresholdCountAtMost { k: need_k()? },
            KindName::MaxOverWindow => FunctionKind::MaxOverWindow { k: need_k()? },
            KindName::Constant => FunctionKind::Constant {
                value: r.value.ok_or("constant needs value")?,
            },
        };
        let spec = MonotoneFunctionSpec { kind, interval: r.interval, window: r.window, grid: r.grid };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<MonotoneFunctionSpec> for FunctionRecord {
    fn from(f: MonotoneFunctionSpec) -> Self {
        let (kind, k, value) = match f.kind {
            FunctionKind::ThresholdCountAtLeast { k } => (KindName::ThresholdCountAtLeast, Some(k), None),
            FunctionKind::ThresholdCountAtMost { k } => (KindName::ThresholdCountAtMost, Some(k), None),
            FunctionKind::MaxOverWindow { k } => (KindName::MaxOverWindow, Some(k), None),
            FunctionKind::Constant { value } => (KindName::Constant, None, Some(value)),
        };
        FunctionRecord { kind, k, value, interval: f.interval, window: f.window, grid: f.grid }
    }
}

impl MonotoneFunctionSpec {
    pub fn direction(&self) -> Direction {
        match self.kind {
            FunctionKind::ThresholdCountAtLeast { .. } | FunctionKind::MaxOverWindow { .. } => Direction::NonDecreasing,
            FunctionKind::ThresholdCountAtMost { .. } => Direction::NonIncreasing,
            FunctionKind::Constant { .. } => Direction::Either,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (x0, x1) = self.interval;
        let (t0, t1) = self.window;
        if !(x0 < x1) || !(t0 <= t1) || self.grid == 0 {
            return Err(invalid(format!("malformed function support: {self:?}")));
        }
        match self.kind {
            FunctionKind::MaxOverWindow { k: 0 } => Err(invalid("max-over-window needs k >= 1")),
            FunctionKind::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(invalid(format!("constant {value} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn support(&self) -> SpaceTimeBox {
        SpaceTimeBox {
            x0: self.interval.0,
            x1: self.interval.1,
            t0: self.window.0,
            t1: self.window.1,
        }
    }

    pub fn grid_times(&self) -> Vec<f64> {
        let (t0, t1) = self.window;
        if self.grid == 1 {
            return vec![t0];
        }
        (0..self.grid)
            .map(|i| t0 + (t1 - t0) * i as f64 / (self.grid - 1) as f64)
            .collect()
    }

    pub fn evaluate(&self, hist: &ParticleHistory) -> Result<f64> {
        if !hist.bx().contains_box(&self.support()) {
            return Err(Error::OutOfDomain(format!("support {:?} outside {:?}", self.support(), hist.bx())));
        }
        if let FunctionKind::Constant { value } = self.kind {
            return Ok(value);
        }
        let mut cursor = hist.cursor();
        let counts: Vec<u64> = self
            .grid_times()
            .into_iter()
            .map(|u| {
                cursor.advance_to(u);
                cursor.configuration().count_in(self.interval.0, self.interval.1) as u64
            })
            .collect();
        Ok(match self.kind {
            FunctionKind::ThresholdCountAtLeast { k } => f64::from(u8::from(counts.iter().any(|c| *c >= k))),
            FunctionKind::ThresholdCountAtMost { k } => f64::from(u8::from(counts.iter().any(|c| *c <= k))),
            FunctionKind::MaxOverWindow { k } => counts.iter().copied().max().unwrap_or(0).min(k) as f64 / k as f64,
            FunctionKind::Constant { value } => value,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    /// λ for the particle process, α for the lattice model.
    pub density: f64,
    pub density_prime: f64,
    pub epsilon: f64,
    pub distance: f64,
    pub per1: f64,
    pub per2: f64,
    /// `E^λ[f1 f2]` on the hull of both boxes.
    pub lhs: McEstimate,
    /// `E^λ[f1]` on `B1`.
    pub f1: McEstimate,
    /// `E^λ'[f2]` on `B2`.
    pub f2: McEstimate,
    pub rhs: f64,
    pub combined_stderr: f64,
    pub pass: bool,
}

/// Checks that both functions are monotone in the direction the density
/// order demands: non-decreasing when `λ < λ'`, non-increasing when
/// `λ' < λ`.
pub fn check_directions(f1: &MonotoneFunctionSpec, f2: &MonotoneFunctionSpec, lambda: f64, lambda_prime: f64) -> Result<()> {
    let wanted = if lambda < lambda_prime {
        Direction::NonDecreasing
    } else if lambda_prime < lambda {
        Direction::NonIncreasing
    } else {
        return Err(Error::InvalidConfiguration("lambda and lambda' must differ".into()));
    };
    for f in [f1, f2] {
        let d = f.direction();
        if d != wanted && d != Direction::Either {
            return Err(Error::InvalidConfiguration(format!(
                "{:?} is {d:?} but the densities need {wanted:?}",
                f.kind
            )));
        }
    }
    Ok(())
}

/// Standard error of `lhs − a·b` with independent estimates.
pub fn combined_stderr(lhs: &McEstimate, a: &McEstimate, b: &McEstimate) -> f64 {
    (lhs.stderr.powi(2) + (b.mean * a.stderr).powi(2) + (a.mean * b.stderr).powi(2)).sqrt()
}

/// Monte-Carlo check of `E^λ[f1 f2] ≤ E^λ[f1]·E^λ'[f2] + 2·(combined
/// stderr)`. The left side comes from one λ-realization on the hull of the
/// boxes, each factor on the right from its own independent realization.
#[allow(clippy::too_many_arguments)]
pub fn decoupling_check(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    f1: &MonotoneFunctionSpec,
    f2: &MonotoneFunctionSpec,
    b1: SpaceTimeBox,
    b2: SpaceTimeBox,
    lambda: f64,
    lambda_prime: f64,
    reps: u32,
) -> Result<DecouplingReport> {
    check_lambda(lambda)?;
    check_lambda(lambda_prime)?;
    check_directions(f1, f2, lambda, lambda_prime)?;
    b1.validate()?;
    b2.validate()?;
    for (f, b) in [(f1, &b1), (f2, &b2)] {
        f.validate()?;
        if !b.contains_box(&f.support()) {
            return Err(Error::InvalidConfiguration(format!("support {:?} not inside {b:?}", f.support())));
        }
    }
    if reps < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: reps as usize });
    }
    let hull = b1.hull(&b2);
    let samples = runner.run(seed, experiment, reps, |s| {
        let joint = evolve_particles(&sample_box_environment(&s.fork(0), lambda, hull)?);
        let prod = f1.evaluate(&joint)? * f2.evaluate(&joint)?;
        let v1 = f1.evaluate(&evolve_particles(&sample_box_environment(&s.fork(1), lambda, b1)?))?;
        let v2 = f2.evaluate(&evolve_particles(&sample_box_environment(&s.fork(2), lambda_prime, b2)?))?;
        Ok((prod, v1, v2))
    })?;
    let lhs = mc_estimate(&samples.iter().map(|v| v.0).collect::<Vec<_>>())?;
    let e1 = mc_estimate(&samples.iter().map(|v| v.1).collect::<Vec<_>>())?;
    let e2 = mc_estimate(&samples.iter().map(|v| v.2).collect::<Vec<_>>())?;
    let rhs = e1.mean * e2.mean;
    let se = combined_stderr(&lhs, &e1, &e2);
    Ok(DecouplingReport {
        density: lambda,
        density_prime: lambda_prime,
        epsilon: (lambda.powi(-2) - lambda_prime.powi(-2)).abs(),
        distance: b1.distance(&b2),
        per1: b1.per(),
        per2: b2.per(),
        lhs,
        f1: e1,
        f2: e2,
        rhs,
        combined_stderr: se,
        pass: lhs.mean <= rhs + 2.0 * se,
    })
}
