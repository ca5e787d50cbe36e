//! One- and two-dimensional point sets and Poisson sampling.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::SpaceTimeBox;
use crate::rng::RandomStream;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(invalid(format!("malformed interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// Sorted coordinates inside a window. Ties are kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet1D {
    coords: Vec<f64>,
    window: Interval,
}

impl PointSet1D {
    pub fn empty(window: Interval) -> Self {
        Self { coords: Vec::new(), window }
    }

    /// Sorts the coordinates; fails if any lies outside the window.
    pub fn from_coords(mut coords: Vec<f64>, window: Interval) -> Result<Self> {
        if let Some(c) = coords.iter().find(|c| !(window.lo <= **c && **c <= window.hi)) {
            return Err(invalid(format!("point {c} outside [{}, {}]", window.lo, window.hi)));
        }
        coords.sort_by(f64::total_cmp);
        Ok(Self { coords, window })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Number of points `≤ v`.
    pub fn count_le(&self, v: f64) -> usize {
        self.coords.partition_point(|c| *c <= v)
    }

    /// Number of points in the half-open interval `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.count_le(b).saturating_sub(self.count_le(a))
    }
}

/// Space-time points `(x, t)` sorted by time, then space. Ties are kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet2D {
    points: Vec<(f64, f64)>,
    window: SpaceTimeBox,
}

impl PointSet2D {
    pub fn empty(window: SpaceTimeBox) -> Self {
        Self { points: Vec::new(), window }
    }

    pub fn from_points(mut points: Vec<(f64, f64)>, window: SpaceTimeBox) -> Result<Self> {
        if let Some(p) = points.iter().find(|(x, t)| !window.contains(*x, *t)) {
            return Err(invalid(format!("point {p:?} outside window {window:?}")));
        }
        points.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        Ok(Self { points, window })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn window(&self) -> SpaceTimeBox {
        self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in the open box `(x0, x1) × (t0, t1)`, re-windowed to `rect`.
    pub fn restrict_open(&self, rect: &SpaceTimeBox) -> PointSet2D {
        let lo = self.points.partition_point(|p| p.1 <= rect.t0);
        let hi = self.points.partition_point(|p| p.1 < rect.t1);
        let points = self.points[lo..hi.max(lo)]
            .iter()
            .copied()
            .filter(|(x, _)| rect.x0 < *x && *x < rect.x1)
            .collect();
        PointSet2D { points, window: *rect }
    }
}

/// Uniform draw in the open interval `(lo, hi)`; `lo < hi` required.
fn open_uniform(s: &mut RandomStream, lo: f64, hi: f64) -> f64 {
    loop {
        let v = s.uniform_in(lo, hi);
        if lo < v && v < hi {
            return v;
        }
    }
}

/// Poisson process of the given rate on `window`. Points fall in the open
/// interior of the window.
pub fn sample_ppp_1d(s: &mut RandomStream, rate: f64, window: Interval) -> Result<PointSet1D> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(invalid(format!("rate must be non-negative, got {rate}")));
    }
    if rate == 0.0 || window.is_empty() {
        return Ok(PointSet1D::empty(window));
    }
    let n = s.poisson(rate * window.len())?;
    let mut coords: Vec<f64> = (0..n).map(|_| open_uniform(s, window.lo, window.hi)).collect();
    coords.sort_by(f64::total_cmp);
    Ok(PointSet1D { coords, window })
}

/// Poisson process of the given rate per unit area on `window`, points in
/// the open interior.
pub fn sample_ppp_2d(s: &mut RandomStream, rate: f64, window: SpaceTimeBox) -> Result<PointSet2D> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(invalid(format!("rate must be non-negative, got {rate}")));
    }
    window.validate()?;
    if rate == 0.0 || window.width() <= 0.0 || window.height() <= 0.0 {
        return Ok(PointSet2D::empty(window));
    }
    let n = s.poisson(rate * window.area())?;
    let mut points: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x = open_uniform(s, window.x0, window.x1);
            let t = open_uniform(s, window.t0, window.t1);
            (x, t)
        })
        .collect();
    points.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Ok(PointSet2D { points, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_and_zero_measure_are_empty() {
        let mut s = RandomStream::new(1, 1);
        let w = Interval::new(0.0, 10.0).unwrap();
        assert!(sample_ppp_1d(&mut s, 0.0, w).unwrap().is_empty());
        let w0 = Interval::new(0.0, 0.0).unwrap();
        assert!(sample_ppp_1d(&mut s, 2.0, w0).unwrap().is_empty());
        let b = SpaceTimeBox::new(0.0, 5.0, 1.0, 1.0).unwrap();
        assert!(sample_ppp_2d(&mut s, 1.0, b).unwrap().is_empty());
        let b = SpaceTimeBox::new(0.0, 5.0, 0.0, 5.0).unwrap();
        assert!(sample_ppp_2d(&mut s, 0.0, b).unwrap().is_empty());
    }

    #[test]
    fn negative_rate_is_rejected() {
        let mut s = RandomStream::new(1, 1);
        let w = Interval::new(0.0, 10.0).unwrap();
        assert!(sample_ppp_1d(&mut s, -1.0, w).is_err());
        let b = SpaceTimeBox::new(0.0, 5.0, 0.0, 5.0).unwrap();
        assert!(sample_ppp_2d(&mut s, -1.0, b).is_err());
    }

    #[test]
    fn one_dimensional_counts_have_poisson_mean() {
        let w = Interval::new(0.0, 10.0).unwrap();
        let reps = 10_000;
        let mut total = 0usize;
        for r in 0..reps {
            let mut s = RandomStream::for_replicate(5, 0, r);
            let p = sample_ppp_1d(&mut s, 2.0, w).unwrap();
            assert!(p.coords().windows(2).all(|c| c[0] <= c[1]));
            assert!(p.coords().iter().all(|c| 0.0 < *c && *c < 10.0));
            total += p.len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 20.0).abs() < 3.0 * (20.0f64 / reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn two_dimensional_counts_have_poisson_mean() {
        let b = SpaceTimeBox::new(0.0, 5.0, 0.0, 5.0).unwrap();
        let reps = 10_000;
        let mut total = 0usize;
        for r in 0..reps {
            let mut s = RandomStream::for_replicate(6, 0, r);
            let p = sample_ppp_2d(&mut s, 1.0, b).unwrap();
            assert!(p.points().windows(2).all(|w| w[0].1 <= w[1].1));
            total += p.len();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 25.0).abs() < 3.0 * (25.0f64 / reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn count_in_is_half_open() {
        let w = Interval::new(0.0, 10.0).unwrap();
        let p = PointSet1D::from_coords(vec![3.0, 1.0, 2.0], w).unwrap();
        assert_eq!(p.coords(), &[1.0, 2.0, 3.0]);
        assert_eq!(p.count_in(1.0, 3.0), 2);
        assert_eq!(p.count_in(0.0, 1.0), 1);
        assert!(PointSet1D::from_coords(vec![11.0], w).is_err());
    }
}
