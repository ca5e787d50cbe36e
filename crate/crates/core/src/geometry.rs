//! Space-time boxes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Axis-aligned box `[x0, x1] × [t0, t1]`, space horizontal and time vertical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl SpaceTimeBox {
    pub fn new(x0: f64, x1: f64, t0: f64, t1: f64) -> Result<Self> {
        let b = Self { x0, x1, t0, t1 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.x0, self.x1, self.t0, self.t1].iter().all(|v| v.is_finite());
        if !all_finite || self.x0 > self.x1 || self.t0 > self.t1 {
            return Err(invalid(format!(
                "malformed box [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.t0, self.t1
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Half-perimeter: width plus height.
    pub fn per(&self) -> f64 {
        self.width() + self.height()
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.t0 <= t && t <= self.t1
    }

    pub fn contains_box(&self, other: &SpaceTimeBox) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.t0 <= other.t0 && other.t1 <= self.t1
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &SpaceTimeBox) -> SpaceTimeBox {
        SpaceTimeBox {
            x0: self.x0.min(other.x0),
            x1: self.x1.max(other.x1),
            t0: self.t0.min(other.t0),
            t1: self.t1.max(other.t1),
        }
    }

    pub fn shifted(&self, dx: f64, dt: f64) -> SpaceTimeBox {
        SpaceTimeBox {
            x0: self.x0 + dx,
            x1: self.x1 + dx,
            t0: self.t0 + dt,
            t1: self.t1 + dt,
        }
    }

    /// Horizontal gap plus vertical gap; zero for overlapping boxes.
    pub fn distance(&self, other: &SpaceTimeBox) -> f64 {
        let dh = (other.x0 - self.x1).max(self.x0 - other.x1).max(0.0);
        let dv = (other.t0 - self.t1).max(self.t0 - other.t1).max(0.0);
        dh + dv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_boxes() {
        assert!(SpaceTimeBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(SpaceTimeBox::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(SpaceTimeBox::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(SpaceTimeBox::new(0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn per_and_distance() {
        let a = SpaceTimeBox::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let b = SpaceTimeBox::new(30.0, 40.0, 15.0, 20.0).unwrap();
        assert_eq!(a.per(), 20.0);
        assert_eq!(b.per(), 15.0);
        assert_eq!(a.distance(&b), 25.0);
        assert_eq!(b.distance(&a), 25.0);
        assert_eq!(a.distance(&a), 0.0);
        let h = a.hull(&b);
        assert_eq!((h.x0, h.x1, h.t0, h.t1), (0.0, 40.0, 0.0, 20.0));
    }
}
