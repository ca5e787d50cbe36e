use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::SpaceTimeBox;
use crate::points::{sample_ppp_1d, sample_ppp_2d, Interval, PointSet1D, PointSet2D};
use crate::rng::RandomStream;

const SOURCES_STREAM: u32 = 0;
const SINKS_STREAM: u32 = 1;
const CLOCKS_STREAM: u32 = 2;

/// Complete randomness of one Hammersley realization on a box: sources on
/// the bottom edge (rate λ), sinks on the left edge (rate 1/λ) and bulk
/// clocks in the interior (rate 1).
#[derive(Clone, Debug, PartialEq)]
pub struct BoxEnvironment {
    lambda: f64,
    bx: SpaceTimeBox,
    sources: PointSet1D,
    sinks: PointSet1D,
    clocks: PointSet2D,
}

/// On-disk form, full double precision.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentJson {
    lambda: f64,
    #[serde(rename = "box")]
    bx: SpaceTimeBox,
    sources: Vec<f64>,
    sinks: Vec<f64>,
    clocks: Vec<[f64; 2]>,
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

impl BoxEnvironment {
    /// Builds an environment from explicit marks. Sources must lie in
    /// `(x0, x1)`, sinks in `(t0, t1)`, clocks in the open interior.
    pub fn new(
        lambda: f64,
        bx: SpaceTimeBox,
        sources: Vec<f64>,
        sinks: Vec<f64>,
        clocks: Vec<(f64, f64)>,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        bx.validate()?;
        if let Some(s) = sources.iter().find(|s| !(bx.x0 < **s && **s < bx.x1)) {
            return Err(invalid(format!("source {s} not inside ({}, {})", bx.x0, bx.x1)));
        }
        if let Some(s) = sinks.iter().find(|s| !(bx.t0 < **s && **s < bx.t1)) {
            return Err(invalid(format!("sink {s} not inside ({}, {})", bx.t0, bx.t1)));
        }
        if let Some(c) = clocks
            .iter()
            .find(|(x, t)| !(bx.x0 < *x && *x < bx.x1 && bx.t0 < *t && *t < bx.t1))
        {
            return Err(invalid(format!("clock {c:?} not in the open box")));
        }
        Ok(Self {
            lambda,
            bx,
            sources: PointSet1D::from_coords(sources, Interval { lo: bx.x0, hi: bx.x1 })?,
            sinks: PointSet1D::from_coords(sinks, Interval { lo: bx.t0, hi: bx.t1 })?,
            clocks: PointSet2D::from_points(clocks, bx)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bx(&self) -> SpaceTimeBox {
        self.bx
    }

    pub fn sources(&self) -> &PointSet1D {
        &self.sources
    }

    pub fn sinks(&self) -> &PointSet1D {
        &self.sinks
    }

    pub fn clocks(&self) -> &PointSet2D {
        &self.clocks
    }

    pub fn total_marks(&self) -> usize {
        self.sources.len() + self.sinks.len() + self.clocks.len()
    }

    /// Same sources and clocks, no sinks.
    pub fn without_sinks(&self) -> BoxEnvironment {
        BoxEnvironment {
            sinks: PointSet1D::empty(self.sinks.window()),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let j = EnvironmentJson {
            lambda: self.lambda,
            bx: self.bx,
            sources: self.sources.coords().to_vec(),
            sinks: self.sinks.coords().to_vec(),
            clocks: self.clocks.points().iter().map(|(x, t)| [*x, *t]).collect(),
        };
        Ok(serde_json::to_string(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: EnvironmentJson = serde_json::from_str(s)?;
        Self::new(
            j.lambda,
            j.bx,
            j.sources,
            j.sinks,
            j.clocks.into_iter().map(|[x, t]| (x, t)).collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl BoxEnvironment {
    /// Assembles already validated parts.
    pub(crate) fn from_parts(lambda: f64, bx: SpaceTimeBox, sources: PointSet1D, sinks: PointSet1D, clocks: PointSet2D) -> Self {
        Self { lambda, bx, sources, sinks, clocks }
    }
}

/// Sources and sinks for density `lambda`, from forks of `s`.
pub(crate) fn sample_boundary(s: &RandomStream, lambda: f64, bx: SpaceTimeBox) -> Result<(PointSet1D, PointSet1D)> {
    let sources = sample_ppp_1d(&mut s.fork(SOURCES_STREAM), lambda, Interval { lo: bx.x0, hi: bx.x1 })?;
    let sinks = sample_ppp_1d(&mut s.fork(SINKS_STREAM), 1.0 / lambda, Interval { lo: bx.t0, hi: bx.t1 })?;
    Ok((sources, sinks))
}

/// Bulk clocks of `bx`, from the clock fork of `s`.
pub(crate) fn sample_clocks(s: &RandomStream, bx: SpaceTimeBox) -> Result<PointSet2D> {
    sample_ppp_2d(&mut s.fork(CLOCKS_STREAM), 1.0, bx)
}

/// Samples sources, sinks and clocks from three forks of `s`.
pub fn sample_box_environment(s: &RandomStream, lambda: f64, bx: SpaceTimeBox) -> Result<BoxEnvironment> {
    check_lambda(lambda)?;
    bx.validate()?;
    let (sources, sinks) = sample_boundary(s, lambda, bx)?;
    let clocks = sample_clocks(s, bx)?;
    Ok(BoxEnvironment {
        lambda,
        bx,
        sources,
        sinks,
        clocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_is_empty() {
        let b = SpaceTimeBox::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let env = sample_box_environment(&RandomStream::new(1, 1), 1.0, b).unwrap();
        assert_eq!(env.total_marks(), 0);
    }

    #[test]
    fn rejects_bad_lambda_and_marks() {
        let b = SpaceTimeBox::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(sample_box_environment(&RandomStream::new(1, 1), 0.0, b).is_err());
        assert!(BoxEnvironment::new(1.0, b, vec![1.0], vec![], vec![]).is_err());
        assert!(BoxEnvironment::new(1.0, b, vec![], vec![0.0], vec![]).is_err());
        assert!(BoxEnvironment::new(1.0, b, vec![], vec![], vec![(0.5, 1.0)]).is_err());
    }

    #[test]
    fn boundary_rates() {
        let b = SpaceTimeBox::new(0.0, 20.0, 0.0, 20.0).unwrap();
        let reps = 10_000u32;
        for (lambda, src_mean, sink_mean) in [(1.0, 20.0, 20.0), (2.0, 40.0, 10.0)] {
            let (mut src, mut snk) = (0usize, 0usize);
            for r in 0..reps {
                let env = sample_box_environment(&RandomStream::for_replicate(2, 0, r), lambda, b).unwrap();
                src += env.sources().len();
                snk += env.sinks().len();
            }
            let n = f64::from(reps);
            let (ms, mk) = (src as f64 / n, snk as f64 / n);
            assert!((ms - src_mean).abs() < 3.0 * (src_mean / n).sqrt(), "{lambda}: {ms}");
            assert!((mk - sink_mean).abs() < 3.0 * (sink_mean / n).sqrt(), "{lambda}: {mk}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let b = SpaceTimeBox::new(0.0, 3.0, 0.0, 4.0).unwrap();
        let env = sample_box_environment(&RandomStream::new(3, 3), 1.3, b).unwrap();
        let back = BoxEnvironment::from_json(&env.to_json().unwrap()).unwrap();
        assert_eq!(env, back);
        assert!(BoxEnvironment::from_json(r#"{"lambda":1}"#).is_err());
    }
}
