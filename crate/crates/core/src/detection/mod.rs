//! The detection game: a target on the integer line jumps at most `N`
//! sites per step and must sit only on sites that no particle comes within
//! distance `r` of during the step.

mod crossing;
mod schedule;

pub use crossing::{crossing_exists, estimate_trigger, vertical_crossing_exists, CrossingGeometry, TriggerReport};
pub use schedule::{detection_schedule, ScaleRow};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_domain, Result};
use crate::geometry::SpaceTimeBox;
use crate::hammersley::{check_lambda, evolve_particles, sample_box_environment, ParticleHistory};
use crate::harness::Runner;
use crate::rng::RandomStream;
use crate::stats::{mc_estimate, McEstimate};

/// Integer site window `x_lo..=x_hi` by `n_lo..=n_hi`. Site `(x, n)` is the
/// point `x·Δs` during `[n·Δt, (n+1)·Δt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteWindow {
    pub x_lo: i64,
    pub x_hi: i64,
    pub n_lo: i64,
    pub n_hi: i64,
    #[serde(default = "unit")]
    pub delta_s: f64,
    #[serde(default = "unit")]
    pub delta_t: f64,
}

fn unit() -> f64 {
    1.0
}

impl SiteWindow {
    pub fn new(x_lo: i64, x_hi: i64, n_lo: i64, n_hi: i64) -> Result<Self> {
        let w = Self { x_lo, x_hi, n_lo, n_hi, delta_s: 1.0, delta_t: 1.0 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_lo > self.x_hi || self.n_lo > self.n_hi {
            return Err(invalid(format!("empty site window {self:?}")));
        }
        if !(self.delta_s > 0.0 && self.delta_t > 0.0) {
            return Err(invalid("site spacings must be positive"));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        (self.x_hi - self.x_lo + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.n_hi - self.n_lo + 1) as usize
    }

    /// Smallest box a history must cover to decide every site at radius `r`.
    pub fn required_box(&self, r: f64) -> SpaceTimeBox {
        SpaceTimeBox {
            x0: self.x_lo as f64 * self.delta_s - r,
            x1: self.x_hi as f64 * self.delta_s + r,
            t0: self.n_lo as f64 * self.delta_t,
            t1: (self.n_hi + 1) as f64 * self.delta_t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteGrid {
    window: SiteWindow,
    /// Row-major by time: `open[(n − n_lo)·width + (x − x_lo)]`.
    open: Vec<bool>,
}

impl SiteGrid {
    pub fn from_fn(window: SiteWindow, mut f: impl FnMut(i64, i64) -> bool) -> Result<Self> {
        window.validate()?;
        let mut open = Vec::with_capacity(window.width() * window.height());
        for n in window.n_lo..=window.n_hi {
            for x in window.x_lo..=window.x_hi {
                open.push(f(x, n));
            }
        }
        Ok(Self { window, open })
    }

    pub fn window(&self) -> SiteWindow {
        self.window
    }

    pub fn contains(&self, x: i64, n: i64) -> bool {
        (self.window.x_lo..=self.window.x_hi).contains(&x) && (self.window.n_lo..=self.window.n_hi).contains(&n)
    }

    /// Sites outside the window count as closed.
    pub fn is_open(&self, x: i64, n: i64) -> bool {
        self.contains(x, n) && self.open[self.offset(x, n)]
    }

    fn offset(&self, x: i64, n: i64) -> usize {
        (n - self.window.n_lo) as usize * self.window.width() + (x - self.window.x_lo) as usize
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|o| **o).count()
    }
}

/// Marks site `(x, n)` closed iff some particle position held at some time
/// in `[n·Δt, (n+1)·Δt)` lies in `(x·Δs − r, x·Δs + r)`.
pub fn openness_grid(h: &ParticleHistory, r: f64, window: SiteWindow) -> Result<SiteGrid> {
    window.validate()?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid(format!("detection radius must be non-negative, got {r}")));
    }
    let need = window.required_box(r);
    if !h.bx().contains_box(&need) {
        return Err(out_of_domain(format!("site window needs {need:?}, history covers {:?}", h.bx())));
    }
    let mut open = Vec::with_capacity(window.width() * window.height());
    let mut cursor = h.cursor();
    let events = h.events();
    let mut next = 0;
    for n in window.n_lo..=window.n_hi {
        let (s, u) = (n as f64 * window.delta_t, (n + 1) as f64 * window.delta_t);
        cursor.advance_to(s);
        let mut held: Vec<f64> = cursor.configuration().positions.clone();
        while next < events.len() && events[next].time <= s {
            next += 1;
        }
        let mut k = next;
        while k < events.len() && events[k].time < u {
            if let Some(p) = events[k].to {
                held.push(p);
            }
            k += 1;
        }
        held.sort_by(f64::total_cmp);
        for x in window.x_lo..=window.x_hi {
            let c = x as f64 * window.delta_s;
            // first held position > c − r
            let i = held.partition_point(|p| *p <= c - r);
            open.push(!(i < held.len() && held[i] < c + r));
        }
    }
    Ok(SiteGrid { window, open })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachEvolution {
    /// `sets[m]` holds the reachable positions at time `n_lo + m`, sorted.
    pub sets: Vec<Vec<i64>>,
    /// First time with an empty reachable set, or `None` if the target
    /// survived to the last row.
    pub detected_at: Option<i64>,
    /// Some reachable jump left the spatial window and was dropped.
    pub censored: bool,
}

impl ReachEvolution {
    pub fn survived(&self) -> bool {
        self.detected_at.is_none()
    }
}

/// Forward reachability from `(start, n_lo)` with jumps of at most `n_jump`
/// sites per row.
pub fn reach_dp(g: &SiteGrid, start: i64, n_jump: u64) -> ReachEvolution {
    let w = g.window;
    let width = w.width();
    let reach = i64::try_from(n_jump).unwrap_or(i64::MAX);
    let mut cur: Vec<bool> = (w.x_lo..=w.x_hi).map(|x| x == start && g.is_open(x, w.n_lo)).collect();
    let mut sets = vec![to_positions(&cur, w.x_lo)];
    let mut censored = false;
    if sets[0].is_empty() {
        return ReachEvolution { sets, detected_at: Some(w.n_lo), censored };
    }
    let mut prefix = vec![0usize; width + 1];
    for n in w.n_lo + 1..=w.n_hi {
        for (i, c) in cur.iter().enumerate() {
            prefix[i + 1] = prefix[i] + usize::from(*c);
        }
        if let (Some(lo), Some(hi)) = (sets.last().unwrap().first(), sets.last().unwrap().last()) {
            censored |= lo.saturating_sub(reach) < w.x_lo || hi.saturating_add(reach) > w.x_hi;
        }
        let mut next = vec![false; width];
        for (i, slot) in next.iter_mut().enumerate() {
            let x = w.x_lo + i as i64;
            if !g.is_open(x, n) {
                continue;
            }
            let a = (i as i64).saturating_sub(reach).max(0) as usize;
            let b = ((i as i64).saturating_add(reach).min(width as i64 - 1)) as usize;
            *slot = prefix[b + 1] > prefix[a];
        }
        cur = next;
        let set = to_positions(&cur, w.x_lo);
        let empty = set.is_empty();
        sets.push(set);
        if empty {
            return ReachEvolution { sets, detected_at: Some(n), censored };
        }
    }
    ReachEvolution { sets, detected_at: None, censored }
}

fn to_positions(mask: &[bool], x_lo: i64) -> Vec<i64> {
    mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| x_lo + i as i64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalQuery {
    pub lambda: f64,
    pub r: f64,
    /// Rows `0..=horizon`.
    pub horizon: i64,
    /// Spatial window `-half_width..=half_width`.
    pub half_width: i64,
}

impl SurvivalQuery {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.r >= 0.0) || !self.r.is_finite() || self.horizon < 0 || self.half_width < 0 {
            return Err(invalid(format!("bad survival query {self:?}")));
        }
        Ok(())
    }

    pub fn window(&self) -> SiteWindow {
        SiteWindow {
            x_lo: -self.half_width,
            x_hi: self.half_width,
            n_lo: 0,
            n_hi: self.horizon,
            delta_s: 1.0,
            delta_t: 1.0,
        }
    }

    /// Environment box: the required box plus one unit of slack on the
    /// spatial sides.
    pub fn environment_box(&self) -> SpaceTimeBox {
        let b = self.window().required_box(self.r);
        SpaceTimeBox { x0: b.x0 - 1.0, x1: b.x1 + 1.0, ..b }
    }

    fn sample_grid(&self, s: &RandomStream) -> Result<SiteGrid> {
        let env = sample_box_environment(s, self.lambda, self.environment_box())?;
        openness_grid(&evolve_particles(&env), self.r, self.window())
    }
}

/// Survival indicators for each jump range in `ranges`, all computed on the
/// same grid per replicate. Row `i` of the result lists replicate outcomes
/// for `ranges[i]` as `(survived, censored)`.
pub fn survival_indicators(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    q: &SurvivalQuery,
    ranges: &[u64],
    reps: u32,
) -> Result<Vec<Vec<(bool, bool)>>> {
    q.validate()?;
    let per_rep = runner.run(seed, experiment, reps, |s| {
        let g = q.sample_grid(&s)?;
        Ok(ranges
            .iter()
            .map(|&nj| {
                let e = reach_dp(&g, 0, nj);
                (e.survived(), e.censored)
            })
            .collect::<Vec<_>>())
    })?;
    Ok((0..ranges.len()).map(|i| per_rep.iter().map(|row| row[i]).collect()).collect())
}

/// Monte-Carlo estimate of the probability of surviving to the horizon.
/// Runs where the reachable set hit the window edge are flagged censored.
pub fn estimate_survival(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    q: &SurvivalQuery,
    n_jump: u64,
    reps: u32,
) -> Result<McEstimate> {
    let rows = survival_indicators(runner, seed, experiment, q, &[n_jump], reps)?;
    survival_estimate(&rows[0])
}

/// Survival estimate from `(survived, censored)` outcomes, with the
/// censored share in the flags.
pub fn survival_estimate(row: &[(bool, bool)]) -> Result<McEstimate> {
    let xs: Vec<f64> = row.iter().map(|(s, _)| f64::from(u8::from(*s))).collect();
    let est = mc_estimate(&xs)?;
    let cens = row.iter().filter(|(_, c)| *c).count();
    let mut flags = est.flags;
    flags.censored = cens > 0;
    flags.censored_fraction = cens as f64 / row.len() as f64;
    Ok(est.with_flags(flags))
}

/// `1 − e^{−2r(λ+1)}`: probability that `(x − r, x + r)` holds a particle at
/// the start of a unit step or sees a clock during it.
pub fn j_event_probability(lambda: f64, r: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid(format!("radius must be non-negative, got {r}")));
    }
    Ok(-(-2.0 * r * (lambda + 1.0)).exp_m1())
}

/// Estimates the same probability from sampled environments on
/// `(−r, r) × (0, 1)`: the event is a source or a clock in the box.
pub fn estimate_j_event(runner: &Runner, seed: u64, experiment: u32, lambda: f64, r: f64, reps: u32) -> Result<McEstimate> {
    check_lambda(lambda)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let bx = SpaceTimeBox { x0: -r, x1: r, t0: 0.0, t1: 1.0 };
    let hits = runner.run(seed, experiment, reps, |s| {
        let env = sample_box_environment(&s, lambda, bx)?;
        Ok(f64::from(u8::from(!env.sources().is_empty() || !env.clocks().is_empty())))
    })?;
    mc_estimate(&hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimeBox;
    use crate::hammersley::BoxEnvironment;
    use crate::oracle::{brute_force_openness, brute_force_survival};

    fn env_with(sources: Vec<f64>, clocks: Vec<(f64, f64)>, bx: SpaceTimeBox) -> BoxEnvironment {
        BoxEnvironment::new(1.0, bx, sources, vec![], clocks).unwrap()
    }

    #[test]
    fn empty_environment_is_all_open() {
        let bx = SpaceTimeBox { x0: -5.0, x1: 5.0, t0: 0.0, t1: 4.0 };
        let h = evolve_particles(&env_with(vec![], vec![], bx));
        let g = openness_grid(&h, 1.0, SiteWindow::new(-3, 3, 0, 2).unwrap()).unwrap();
        assert_eq!(g.open_count(), 21);
    }

    #[test]
    fn static_particle_closes_one_column() {
        let bx = SpaceTimeBox { x0: -5.0, x1: 5.0, t0: 0.0, t1: 4.0 };
        let h = evolve_particles(&env_with(vec![0.0], vec![], bx));
        let g = openness_grid(&h, 1.0, SiteWindow::new(-3, 3, 0, 2).unwrap()).unwrap();
        for n in 0..=2 {
            for x in -3..=3 {
                assert_eq!(g.is_open(x, n), x != 0, "({x}, {n})");
            }
        }
    }

    #[test]
    fn a_jump_closes_both_positions_in_its_step() {
        let bx = SpaceTimeBox { x0: -5.0, x1: 5.0, t0: 0.0, t1: 4.0 };
        // particle at 2.2 jumps to -1.9 at time 1.5
        let h = evolve_particles(&env_with(vec![2.2], vec![(-1.9, 1.5)], bx));
        let g = openness_grid(&h, 0.5, SiteWindow::new(-3, 3, 0, 2).unwrap()).unwrap();
        assert!(!g.is_open(2, 0) && !g.is_open(2, 1) && g.is_open(2, 2));
        assert!(g.is_open(-2, 0) && !g.is_open(-2, 1) && !g.is_open(-2, 2));
    }

    #[test]
    fn window_must_fit_the_history() {
        let bx = SpaceTimeBox { x0: -2.0, x1: 2.0, t0: 0.0, t1: 2.0 };
        let h = evolve_particles(&env_with(vec![], vec![], bx));
        assert!(openness_grid(&h, 1.0, SiteWindow::new(-2, 2, 0, 1).unwrap()).is_err());
        assert!(openness_grid(&h, 1.0, SiteWindow::new(-1, 1, 0, 1).unwrap()).is_ok());
    }

    #[test]
    fn openness_matches_segment_scan() {
        for rep in 0..40 {
            let q = SurvivalQuery { lambda: 1.0, r: 0.3, horizon: 6, half_width: 5 };
            let env = sample_box_environment(&RandomStream::for_replicate(3, 0, rep), 1.0, q.environment_box()).unwrap();
            let h = evolve_particles(&env);
            let g = openness_grid(&h, q.r, q.window()).unwrap();
            for n in 0..=6 {
                for x in -5..=5 {
                    assert_eq!(g.is_open(x, n), brute_force_openness(&h, q.r, x as f64, n as f64, n as f64 + 1.0));
                }
            }
        }
    }

    #[test]
    fn all_open_reach_is_a_cone() {
        let g = SiteGrid::from_fn(SiteWindow::new(-20, 20, 0, 5).unwrap(), |_, _| true).unwrap();
        let e = reach_dp(&g, 0, 2);
        for (n, set) in e.sets.iter().enumerate() {
            let m = 2 * n as i64;
            assert_eq!(set, &(-m..=m).collect::<Vec<_>>());
        }
        assert!(e.survived() && !e.censored);
        assert!(reach_dp(&g, 0, 5).censored);
    }

    #[test]
    fn closed_origin_is_detected_at_once() {
        let g = SiteGrid::from_fn(SiteWindow::new(-2, 2, 0, 3).unwrap(), |x, n| (x, n) != (0, 0)).unwrap();
        let e = reach_dp(&g, 0, 1);
        assert_eq!(e.detected_at, Some(0));
    }

    #[test]
    fn reach_matches_path_enumeration() {
        let mut s = RandomStream::new(9, 0);
        for _ in 0..300 {
            let p = s.uniform_in(0.3, 0.9);
            let g = SiteGrid::from_fn(SiteWindow::new(0, 7, 0, 7).unwrap(), |_, _| s.bernoulli(p)).unwrap();
            let start = s.integer_in(0, 7);
            for nj in 0..=3 {
                assert_eq!(reach_dp(&g, start, nj).survived(), brute_force_survival(&g, start, nj));
            }
        }
    }

    #[test]
    fn survival_is_monotone_in_range_and_radius() {
        let runner = Runner::new(1).unwrap();
        let q = SurvivalQuery { lambda: 1.0, r: 0.4, horizon: 8, half_width: 30 };
        let rows = survival_indicators(&runner, 1, 0, &q, &[0, 1, 2, 3], 60).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a.0 || b.0));
        }
        let wide = SurvivalQuery { r: 0.9, ..q };
        for rep in 0..30 {
            let env = sample_box_environment(&RandomStream::for_replicate(4, 0, rep), 1.0, wide.environment_box()).unwrap();
            let h = evolve_particles(&env);
            let small = openness_grid(&h, 0.4, q.window()).unwrap();
            let large = openness_grid(&h, 0.9, wide.window()).unwrap();
            assert!(reach_dp(&small, 0, 2).survived() >= reach_dp(&large, 0, 2).survived());
        }
    }

    #[test]
    fn survival_extremes() {
        let runner = Runner::new(1).unwrap();
        let sparse = SurvivalQuery { lambda: 0.05, r: 0.01, horizon: 5, half_width: 40 };
        let est = estimate_survival(&runner, 2, 0, &sparse, 40, 40).unwrap();
        assert!(est.mean > 0.9, "{est:?}");
        let dense = SurvivalQuery { lambda: 3.0, r: 3.0, horizon: 5, half_width: 10 };
        assert!(estimate_survival(&runner, 2, 0, &dense, 1, 40).unwrap().mean < 0.1);
    }

    #[test]
    fn j_event_values() {
        assert_eq!(j_event_probability(1.0, 0.0).unwrap(), 0.0);
        assert!((j_event_probability(1.0, 1.0).unwrap() - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
        assert!(j_event_probability(0.0, 1.0).is_err());
        let runner = Runner::new(1).unwrap();
        let p = j_event_probability(0.5, 0.2).unwrap();
        let est = estimate_j_event(&runner, 5, 0, 0.5, 0.2, 10_000).unwrap();
        assert!((est.mean - p).abs() < 3.0 * (p * (1.0 - p) / 1e4).sqrt());
    }
}
