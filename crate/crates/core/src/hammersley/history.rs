//! Event-by-event particle evolution.

use serde::{Deserialize, Serialize};

use super::environment::BoxEnvironment;
use super::field::CountingMeasure;
use crate::error::{out_of_domain, Result};
use crate::geometry::SpaceTimeBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A clock moved the nearest particle on its right onto the clock.
    BulkJump,
    /// A clock fired with no particle on its right inside the box; a
    /// particle enters from beyond the right edge.
    Entry,
    /// A sink removed the leftmost particle.
    LeftExit,
    /// A sink fired while the box was empty.
    UnusedSink,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEvent {
    pub time: f64,
    pub kind: EventKind,
    pub particle: Option<u32>,
    /// Position before the event; `None` when coming from beyond the right
    /// edge.
    pub from: Option<f64>,
    /// Position after the event; `None` when leaving through the left edge.
    pub to: Option<f64>,
}

impl ParticleEvent {
    /// Whether this event carries a particle from right of `a` to at or
    /// left of `a`.
    pub fn crosses(&self, a: f64) -> bool {
        let from = self.from.unwrap_or(f64::INFINITY);
        let to = self.to.unwrap_or(f64::NEG_INFINITY);
        from > a && to <= a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleHistory {
    bx: SpaceTimeBox,
    initial: Vec<f64>,
    events: Vec<ParticleEvent>,
}

/// Particle positions (sorted) with ids, at one instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Configuration {
    pub positions: Vec<f64>,
    pub ids: Vec<u32>,
}

impl Configuration {
    /// Number of particles in `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let hi = self.positions.partition_point(|p| *p <= b);
        let lo = self.positions.partition_point(|p| *p <= a);
        hi.saturating_sub(lo)
    }

    fn apply(&mut self, e: &ParticleEvent) {
        match e.kind {
            EventKind::BulkJump => {
                let i = self.positions.partition_point(|p| *p <= e.to.expect("jump target"));
                self.positions[i] = e.to.expect("jump target");
            }
            EventKind::Entry => {
                self.positions.push(e.to.expect("entry position"));
                self.ids.push(e.particle.expect("entry id"));
            }
            EventKind::LeftExit => {
                self.positions.remove(0);
                self.ids.remove(0);
            }
            EventKind::UnusedSink => {}
        }
    }
}

impl ParticleHistory {
    pub fn bx(&self) -> SpaceTimeBox {
        self.bx
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn events(&self) -> &[ParticleEvent] {
        &self.events
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(self.bx.t0 <= t && t <= self.bx.t1) {
            return Err(out_of_domain(format!("time {t} outside [{}, {}]", self.bx.t0, self.bx.t1)));
        }
        Ok(())
    }

    pub fn cursor(&self) -> HistoryCursor<'_> {
        HistoryCursor {
            hist: self,
            config: Configuration {
                positions: self.initial.clone(),
                ids: (0..self.initial.len() as u32).collect(),
            },
            next: 0,
        }
    }

    /// Configuration at time `t`; an event at exactly `t` has already
    /// happened.
    pub fn configuration_at(&self, t: f64) -> Result<Configuration> {
        self.check_time(t)?;
        let mut c = self.cursor();
        c.advance_to(t);
        Ok(c.config)
    }

    /// Number of particles crossing the vertical line at `a` leftward
    /// during `(s, u]`.
    pub fn flux(&self, a: f64, s: f64, u: f64) -> Result<u64> {
        Ok(self.crossing_times(a, s, u)?.len() as u64)
    }

    /// Times in `(s, u]` at which a particle crosses the line at `a`
    /// leftward.
    pub fn crossing_times(&self, a: f64, s: f64, u: f64) -> Result<Vec<f64>> {
        self.check_time(s)?;
        self.check_time(u)?;
        if !(self.bx.x0 <= a && a <= self.bx.x1) {
            return Err(out_of_domain(format!("line {a} outside [{}, {}]", self.bx.x0, self.bx.x1)));
        }
        Ok(self
            .events
            .iter()
            .filter(|e| s < e.time && e.time <= u && e.crosses(a))
            .map(|e| e.time)
            .collect())
    }

    /// Event times in `[s, u]`.
    pub fn event_times(&self, s: f64, u: f64) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time).filter(move |t| s <= *t && *t <= u)
    }
}

/// Forward replay of a history.
#[derive(Clone, Debug)]
pub struct HistoryCursor<'a> {
    hist: &'a ParticleHistory,
    config: Configuration,
    next: usize,
}

impl HistoryCursor<'_> {
    /// Applies all events with time `≤ t`. Times must be visited in
    /// non-decreasing order.
    pub fn advance_to(&mut self, t: f64) {
        while let Some(e) = self.hist.events.get(self.next) {
            if e.time > t {
                break;
            }
            self.config.apply(e);
            self.next += 1;
        }
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }
}

impl CountingMeasure for ParticleHistory {
    fn measure(&self, x: f64, y: f64, t: f64) -> Result<u64> {
        if !(self.bx.x0 <= x && x <= y && y <= self.bx.x1) {
            return Err(out_of_domain(format!("interval ({x}, {y}] outside [{}, {}]", self.bx.x0, self.bx.x1)));
        }
        Ok(self.configuration_at(t)?.count_in(x, y) as u64)
    }
}

/// Runs the particle dynamics driven by `env`. Sources are the particles at
/// `t0`. A clock at `(x, t)` moves the nearest particle strictly right of
/// `x` onto `x`, or brings a new particle in from the right edge if there
/// is none. A sink removes the leftmost particle.
pub fn evolve_particles(env: &BoxEnvironment) -> ParticleHistory {
    let initial = env.sources().coords().to_vec();
    let mut positions = initial.clone();
    let mut ids: Vec<u32> = (0..initial.len() as u32).collect();
    let mut next_id = initial.len() as u32;
    let clocks = env.clocks().points();
    let sinks = env.sinks().coords();
    let mut events = Vec::with_capacity(clocks.len() + sinks.len());
    let (mut ci, mut si) = (0, 0);
    loop {
        // sinks first on exact time ties
        let take_sink = match (sinks.get(si), clocks.get(ci)) {
            (Some(s), Some(c)) => *s <= c.1,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_sink {
            let time = sinks[si];
            si += 1;
            if positions.is_empty() {
                events.push(ParticleEvent { time, kind: EventKind::UnusedSink, particle: None, from: None, to: None });
            } else {
                let from = positions.remove(0);
                let id = ids.remove(0);
                events.push(ParticleEvent { time, kind: EventKind::LeftExit, particle: Some(id), from: Some(from), to: None });
            }
        } else {
            let (x, time) = clocks[ci];
            ci += 1;
            let i = positions.partition_point(|p| *p <= x);
            if i < positions.len() {
                let from = positions[i];
                positions[i] = x;
                events.push(ParticleEvent {
                    time,
                    kind: EventKind::BulkJump,
                    particle: Some(ids[i]),
                    from: Some(from),
                    to: Some(x),
                });
            } else {
                positions.push(x);
                ids.push(next_id);
                events.push(ParticleEvent { time, kind: EventKind::Entry, particle: Some(next_id), from: None, to: Some(x) });
                next_id += 1;
            }
        }
    }
    ParticleHistory { bx: env.bx(), initial, events }
}

/// The environment that the evolution on `env` induces on the sub-box
/// `sub`: sources are the particles inside `sub` at its bottom time, sinks
/// are the times particles cross its left edge, clocks are the clocks of
/// `env` inside `sub`.
pub fn induced_environment(env: &BoxEnvironment, hist: &ParticleHistory, sub: SpaceTimeBox) -> Result<BoxEnvironment> {
    sub.validate()?;
    if !env.bx().contains_box(&sub) {
        return Err(out_of_domain(format!("{sub:?} not inside {:?}", env.bx())));
    }
    let config = hist.configuration_at(sub.t0)?;
    let sources: Vec<f64> = config
        .positions
        .iter()
        .copied()
        .filter(|p| sub.x0 < *p && *p < sub.x1)
        .collect();
    let sinks: Vec<f64> = hist
        .crossing_times(sub.x0, sub.t0, sub.t1)?
        .into_iter()
        .filter(|t| *t < sub.t1)
        .collect();
    let clocks = env.clocks().restrict_open(&sub).points().to_vec();
    BoxEnvironment::new(env.lambda(), sub, sources, sinks, clocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hammersley::{sample_box_environment, LppField};
    use crate::rng::RandomStream;

    fn bx() -> SpaceTimeBox {
        SpaceTimeBox::new(0.0, 10.0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn static_without_clocks_or_sinks() {
        let env = BoxEnvironment::new(1.0, bx(), vec![1.0, 4.0], vec![], vec![]).unwrap();
        let h = evolve_particles(&env);
        assert!(h.events().is_empty());
        assert_eq!(h.configuration_at(10.0).unwrap().positions, vec![1.0, 4.0]);
    }

    #[test]
    fn one_clock_moves_one_particle() {
        let env = BoxEnvironment::new(1.0, bx(), vec![5.0], vec![], vec![(2.0, 1.0)]).unwrap();
        let h = evolve_particles(&env);
        assert_eq!(
            h.events(),
            &[ParticleEvent { time: 1.0, kind: EventKind::BulkJump, particle: Some(0), from: Some(5.0), to: Some(2.0) }]
        );
        assert_eq!(h.configuration_at(0.5).unwrap().positions, vec![5.0]);
        // the post-event state holds at the event time
        assert_eq!(h.configuration_at(1.0).unwrap().positions, vec![2.0]);
    }

    #[test]
    fn entries_exits_and_unused_sinks() {
        let env = BoxEnvironment::new(1.0, bx(), vec![], vec![1.0, 3.0], vec![(6.0, 2.0)]).unwrap();
        let h = evolve_particles(&env);
        let kinds: Vec<EventKind> = h.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::UnusedSink, EventKind::Entry, EventKind::LeftExit]);
        assert_eq!(h.flux(0.0, 0.0, 10.0).unwrap(), 2);
        assert_eq!(h.flux(7.0, 0.0, 10.0).unwrap(), 2);
        assert_eq!(h.flux(5.0, 0.0, 10.0).unwrap(), 2);
    }

    #[test]
    fn order_is_preserved() {
        let b = SpaceTimeBox::new(0.0, 8.0, 0.0, 8.0).unwrap();
        for rep in 0..50 {
            let env = sample_box_environment(&RandomStream::for_replicate(8, 0, rep), 1.0, b).unwrap();
            let h = evolve_particles(&env);
            let mut c = h.cursor();
            for e in h.events() {
                c.advance_to(e.time);
                let cfg = c.configuration();
                assert!(cfg.positions.windows(2).all(|w| w[0] < w[1]));
                assert!(cfg.positions.iter().all(|p| b.x0 <= *p && *p <= b.x1));
            }
        }
    }

    #[test]
    fn histories_match_fields_and_restrict() {
        let b = SpaceTimeBox::new(0.0, 6.0, 0.0, 6.0).unwrap();
        let sub = SpaceTimeBox::new(2.0, 5.0, 1.5, 5.5).unwrap();
        for rep in 0..100 {
            let env = sample_box_environment(&RandomStream::for_replicate(9, 0, rep), 0.8, b).unwrap();
            let h = evolve_particles(&env);
            let f = LppField::new(&env, true);
            let induced = induced_environment(&env, &h, sub).unwrap();
            let hs = evolve_particles(&induced);
            let fs = LppField::new(&induced, true);
            for i in 0..=6 {
                let t = 1.5 + 4.0 * f64::from(i) / 6.0;
                for (x, y) in [(2.0, 3.0), (2.0, 5.0), (3.3, 4.1)] {
                    let want = f.increment(x, y, t).unwrap();
                    assert_eq!(h.measure(x, y, t).unwrap(), want);
                    assert_eq!(hs.measure(x, y, t).unwrap(), want);
                    assert_eq!(fs.increment(x, y, t).unwrap(), want);
                }
                assert_eq!(
                    f.value(2.0, t).unwrap() - f.value(2.0, 1.5).unwrap(),
                    h.flux(2.0, 1.5, t).unwrap()
                );
            }
        }
    }
}
