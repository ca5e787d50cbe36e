//! Last-passage values of a box environment.

use super::environment::BoxEnvironment;
use super::lis::{patience, Key};
use crate::error::{out_of_domain, Result};
use crate::geometry::SpaceTimeBox;

#[derive(Clone, Copy, Debug)]
struct Mark {
    x: f64,
    t: f64,
    kx: Key,
    kt: Key,
}

/// `L(x, t)`: the largest number of marks on an up-right path from the
/// lower-left corner to `(x, t)`, where a path either runs along the bottom
/// edge collecting sources or up the left edge collecting sinks before
/// entering the bulk. With `use_sinks = false` the left edge carries no
/// weight.
///
/// Values are computed on demand, `O(n log n)` per query.
#[derive(Clone, Debug)]
pub struct LppField<'a> {
    env: &'a BoxEnvironment,
    use_sinks: bool,
    marks: Vec<Mark>,
}

impl<'a> LppField<'a> {
    pub fn new(env: &'a BoxEnvironment, use_sinks: bool) -> Self {
        let bx = env.bx();
        let mut marks = Vec::with_capacity(env.total_marks());
        if use_sinks {
            for (j, tau) in env.sinks().coords().iter().enumerate() {
                marks.push(Mark {
                    x: bx.x0,
                    t: *tau,
                    kx: Key { v: bx.x0, tier: 0, idx: j as u32 },
                    kt: Key::plain(*tau),
                });
            }
        }
        for (i, s) in env.sources().coords().iter().enumerate() {
            marks.push(Mark {
                x: *s,
                t: bx.t0,
                kx: Key::plain(*s),
                kt: Key { v: bx.t0, tier: 0, idx: i as u32 },
            });
        }
        for (cx, ct) in env.clocks().points() {
            marks.push(Mark {
                x: *cx,
                t: *ct,
                kx: Key::plain(*cx),
                kt: Key::plain(*ct),
            });
        }
        marks.sort_by(|a, b| a.kx.cmp(&b.kx).then(b.kt.cmp(&a.kt)));
        Self { env, use_sinks, marks }
    }

    pub fn env(&self) -> &BoxEnvironment {
        self.env
    }

    pub fn use_sinks(&self) -> bool {
        self.use_sinks
    }

    pub fn bx(&self) -> SpaceTimeBox {
        self.env.bx()
    }

    pub fn value(&self, x: f64, t: f64) -> Result<u64> {
        let bx = self.bx();
        if !bx.contains(x, t) {
            return Err(out_of_domain(format!("({x}, {t}) outside {bx:?}")));
        }
        let keys = self.marks.iter().filter(|m| m.x <= x && m.t <= t).map(|m| &m.kt);
        Ok(patience(keys) as u64)
    }

    /// `L(x, t)` for every `x` in `xs` (sorted ascending) in a single
    /// sweep.
    pub fn values_at_time(&self, t: f64, xs: &[f64]) -> Result<Vec<u64>> {
        let bx = self.bx();
        for x in xs {
            if !bx.contains(*x, t) {
                return Err(out_of_domain(format!("({x}, {t}) outside {bx:?}")));
            }
        }
        if xs.windows(2).any(|w| w[0] > w[1]) {
            return Err(out_of_domain("query positions must be sorted"));
        }
        let mut tails: Vec<Key> = Vec::new();
        let mut out = Vec::with_capacity(xs.len());
        let mut marks = self.marks.iter().filter(|m| m.t <= t).peekable();
        for x in xs {
            while let Some(m) = marks.next_if(|m| m.x <= *x) {
                let pos = tails.partition_point(|tail| tail.cmp(&m.kt) == std::cmp::Ordering::Less);
                if pos == tails.len() {
                    tails.push(m.kt);
                } else {
                    tails[pos] = m.kt;
                }
            }
            out.push(tails.len() as u64);
        }
        Ok(out)
    }

    /// `L(y, t) − L(x, t)`.
    pub fn increment(&self, x: f64, y: f64, t: f64) -> Result<u64> {
        if x > y {
            return Err(out_of_domain(format!("interval ({x}, {y}] is reversed")));
        }
        let hi = self.value(y, t)?;
        let lo = self.value(x, t)?;
        Ok(hi - lo)
    }
}

/// Anything that can report the number of particles in `(x, y]` at time `t`.
pub trait CountingMeasure {
    fn measure(&self, x: f64, y: f64, t: f64) -> Result<u64>;
}

impl CountingMeasure for LppField<'_> {
    fn measure(&self, x: f64, y: f64, t: f64) -> Result<u64> {
        self.increment(x, y, t)
    }
}

/// Particle count in `(x, y]` at time `t` according to `src`.
pub fn measure_query(src: &impl CountingMeasure, x: f64, y: f64, t: f64) -> Result<u64> {
    src.measure(x, y, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hammersley::sample_box_environment;
    use crate::rng::RandomStream;

    fn bx() -> SpaceTimeBox {
        SpaceTimeBox::new(0.0, 10.0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn sources_only() {
        let env = BoxEnvironment::new(1.0, bx(), vec![2.0, 5.0, 7.0], vec![], vec![]).unwrap();
        let f = LppField::new(&env, true);
        for t in [0.0, 3.0, 10.0] {
            assert_eq!(f.value(1.0, t).unwrap(), 0);
            assert_eq!(f.value(5.0, t).unwrap(), 2);
            assert_eq!(f.value(10.0, t).unwrap(), 3);
        }
        assert_eq!(f.increment(0.0, 10.0, 0.0).unwrap(), 3);
    }

    #[test]
    fn chain_of_clocks() {
        let env = BoxEnvironment::new(1.0, bx(), vec![], vec![], vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).unwrap();
        let f = LppField::new(&env, true);
        assert_eq!(f.value(10.0, 10.0).unwrap(), 3);
    }

    #[test]
    fn sources_and_sinks_do_not_mix() {
        let env = BoxEnvironment::new(1.0, bx(), vec![1.0, 2.0], vec![1.0, 2.0, 3.0], vec![]).unwrap();
        let f = LppField::new(&env, true);
        assert_eq!(f.value(10.0, 10.0).unwrap(), 3);
        assert_eq!(f.value(0.0, 2.5).unwrap(), 2);
        assert_eq!(LppField::new(&env, false).value(10.0, 10.0).unwrap(), 2);
    }

    #[test]
    fn out_of_domain_queries() {
        let env = BoxEnvironment::new(1.0, bx(), vec![], vec![], vec![]).unwrap();
        let f = LppField::new(&env, true);
        assert!(f.value(11.0, 1.0).is_err());
        assert!(f.value(1.0, -1.0).is_err());
        assert!(f.increment(3.0, 2.0, 1.0).is_err());
        assert_eq!(measure_query(&f, 0.0, 10.0, 5.0).unwrap(), 0);
    }

    #[test]
    fn field_is_monotone_with_unit_steps() {
        let b = SpaceTimeBox::new(0.0, 6.0, 0.0, 6.0).unwrap();
        for rep in 0..20 {
            let env = sample_box_environment(&RandomStream::for_replicate(4, 0, rep), 1.2, b).unwrap();
            let f = LppField::new(&env, true);
            let grid: Vec<f64> = (0..=12).map(|i| f64::from(i) * 0.5).collect();
            for &t in &grid {
                for w in grid.windows(2) {
                    assert!(f.value(w[0], t).unwrap() <= f.value(w[1], t).unwrap());
                    assert!(f.value(t, w[0]).unwrap() <= f.value(t, w[1]).unwrap());
                }
            }
            assert_eq!(f.value(0.0, 0.0).unwrap(), 0);
            let swept = f.values_at_time(3.3, &grid).unwrap();
            let single: Vec<u64> = grid.iter().map(|x| f.value(*x, 3.3).unwrap()).collect();
            assert_eq!(swept, single);
        }
    }
}
