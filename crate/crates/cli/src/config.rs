//! Declarative experiment configs. Every kind has defaults for every
//! field, so `{"kind": "schedule"}` is a complete config.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sprinkle::coupling::{FunctionKind, MonotoneFunctionSpec};
use sprinkle::exp_lpp::{ExpFunctionKind, ExpFunctionSpec};
use sprinkle::geometry::SpaceTimeBox;
use sprinkle::rwre::{default_offsets, EnvironmentMode, WalkConfig};

use crate::CliError;

/// Largest box area (expected clock count at unit intensity).
pub const MAX_BOX_AREA: f64 = 4.0e6;
pub const MAX_REPS: u32 = 10_000_000;
/// Largest product of replicates and per-replicate size.
pub const MAX_WORK: f64 = 1.0e11;
pub const MAX_GRID_CELLS: usize = 10_000_000;
pub const MAX_SCHEDULE_ROWS: u32 = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Simulate(SimulateConfig),
    Decouple(DecoupleConfig),
    DecoupleExp(DecoupleExpConfig),
    Exitpoint(ExitpointConfig),
    Detect(DetectConfig),
    RwreSpeed(RwreSpeedConfig),
    ExplppChecks(ExplppConfig),
    PoissonBound(PoissonConfig),
    Schedule(ScheduleConfig),
}

fn unit_box(side: f64) -> SpaceTimeBox {
    SpaceTimeBox { x0: 0.0, x1: side, t0: 0.0, t1: side }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub lambda: f64,
    #[serde(rename = "box")]
    pub bx: SpaceTimeBox,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { seed: None, reps: 10, out: None, lambda: 1.0, bx: unit_box(10.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoupleConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub b1: SpaceTimeBox,
    pub b2: SpaceTimeBox,
    pub f1: MonotoneFunctionSpec,
    pub f2: MonotoneFunctionSpec,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        let b1 = unit_box(3.0);
        let b2 = SpaceTimeBox { x0: 0.0, x1: 3.0, t0: 13.0, t1: 16.0 };
        let f = |b: &SpaceTimeBox| MonotoneFunctionSpec {
            kind: FunctionKind::ThresholdCountAtLeast { k: 5 },
            interval: (b.x0, b.x1),
            window: (b.t0, b.t1),
            grid: 5,
        };
        Self { seed: None, reps: 10_000, out: None, lambda: 1.0, lambda_prime: 1.1, b1, b2, f1: f(&b1), f2: f(&b2) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoupleExpConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub f1: ExpFunctionSpec,
    pub f2: ExpFunctionSpec,
}

impl Default for DecoupleExpConfig {
    fn default() -> Self {
        let f = |columns, rows| ExpFunctionSpec { kind: ExpFunctionKind::IncrementAtMost { level: 5.6 }, columns, rows };
        Self {
            seed: None,
            reps: 10_000,
            out: None,
            alpha: 0.5,
            alpha_prime: 0.45,
            f1: f((10, 14), (0, 1)),
            f2: f((10, 14), (12, 13)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExitpointConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub lambda: f64,
    #[serde(rename = "box")]
    pub bx: SpaceTimeBox,
    /// Query point; defaults to the top-right corner.
    pub x: Option<f64>,
    pub t: Option<f64>,
}

impl Default for ExitpointConfig {
    fn default() -> Self {
        Self { seed: None, reps: 1000, out: None, lambda: 1.0, bx: unit_box(50.0), x: None, t: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    pub l0: u32,
    pub k: u32,
    pub reps: u32,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self { l0: 6, k: 0, reps: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub lambda: f64,
    pub r: f64,
    pub horizon: i64,
    pub half_width: i64,
    pub ranges: Vec<u64>,
    pub trigger: Option<TriggerConfig>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            seed: None,
            reps: 1000,
            out: None,
            lambda: 1.0,
            r: 0.2,
            horizon: 20,
            half_width: 100,
            ranges: vec![0, 1, 2, 3, 4],
            trigger: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RwreSpeedConfig {
    pub seed: Option<u64>,
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub rho: f64,
    pub horizon: u32,
    pub walk: WalkConfig,
    pub mode: EnvironmentMode,
    pub offsets: Vec<(f64, f64)>,
    /// Bisection tolerance of the speed bracket.
    pub tol: f64,
    /// Number of equally spaced speeds in `[−1, 1]` at which both
    /// deviation estimates are tabulated.
    pub grid: u32,
}

impl Default for RwreSpeedConfig {
    fn default() -> Self {
        Self {
            seed: None,
            reps: 200,
            out: None,
            rho: 1.0,
            horizon: 100,
            walk: WalkConfig { p_occupied: 0.8, p_vacant: 0.3 },
            mode: EnvironmentMode::Hammersley,
            offsets: default_offsets(),
            tol: 1e-3,
            grid: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplppConfig {
    pub seed: Option<u64>,
    /// Replicates for the mean passage time.
    pub reps: u32,
    pub out: Option<PathBuf>,
    pub alphas: Vec<f64>,
    pub side: usize,
    pub enumeration_grids: u32,
    pub enumeration_side: usize,
    pub increment_reps: u32,
    pub increment_side: usize,
}

impl Default for ExplppConfig {
    fn default() -> Self {
        Self {
            seed: None,
            reps: 500,
            out: None,
            alphas: vec![0.3, 0.5, 0.7],
            side: 100,
            enumeration_grids: 100,
            enumeration_side: 6,
            increment_reps: 2000,
            increment_side: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub out: Option<PathBuf>,
    pub lambdas: Vec<f64>,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self { out: None, lambdas: sprinkle::experiments::bounds::GRID_LAMBDAS.to_vec() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Detection,
    Walk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub out: Option<PathBuf>,
    pub schedule: ScheduleKind,
    /// Decimal integer; `l_0` for the crossing scales, `L_0` for the walk.
    pub l0: String,
    pub k_max: u32,
    pub rho: f64,
    pub delta: f64,
    pub c1: f64,
    pub rho_c_minus: f64,
    pub v_target: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            out: None,
            schedule: ScheduleKind::Walk,
            l0: "10000000000".into(),
            k_max: 12,
            rho: 0.3,
            delta: 0.05,
            c1: 1.0,
            rho_c_minus: 0.5,
            v_target: 0.6,
        }
    }
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Simulate(_) => "simulate",
            Self::Decouple(_) => "decouple",
            Self::DecoupleExp(_) => "decouple-exp",
            Self::Exitpoint(_) => "exitpoint",
            Self::Detect(_) => "detect",
            Self::RwreSpeed(_) => "rwre-speed",
            Self::ExplppChecks(_) => "explpp-checks",
            Self::PoissonBound(_) => "poisson-bound",
            Self::Schedule(_) => "schedule",
        }
    }

    pub fn default_for(kind: &str) -> Option<Self> {
        Some(match kind {
            "simulate" => Self::Simulate(Default::default()),
            "decouple" => Self::Decouple(Default::default()),
            "decouple-exp" => Self::DecoupleExp(Default::default()),
            "exitpoint" => Self::Exitpoint(Default::default()),
            "detect" => Self::Detect(Default::default()),
            "rwre-speed" => Self::RwreSpeed(Default::default()),
            "explpp-checks" => Self::ExplppChecks(Default::default()),
            "poisson-bound" => Self::PoissonBound(Default::default()),
            "schedule" => Self::Schedule(Default::default()),
            _ => return None,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Simulate(c) => c.seed,
            Self::Decouple(c) => c.seed,
            Self::DecoupleExp(c) => c.seed,
            Self::Exitpoint(c) => c.seed,
            Self::Detect(c) => c.seed,
            Self::RwreSpeed(c) => c.seed,
            Self::ExplppChecks(c) => c.seed,
            Self::PoissonBound(_) | Self::Schedule(_) => None,
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Self::Simulate(c) => c.out.as_ref(),
            Self::Decouple(c) => c.out.as_ref(),
            Self::DecoupleExp(c) => c.out.as_ref(),
            Self::Exitpoint(c) => c.out.as_ref(),
            Self::Detect(c) => c.out.as_ref(),
            Self::RwreSpeed(c) => c.out.as_ref(),
            Self::ExplppChecks(c) => c.out.as_ref(),
            Self::PoissonBound(c) => c.out.as_ref(),
            Self::Schedule(c) => c.out.as_ref(),
        }
    }

    fn reps_mut(&mut self) -> Option<&mut u32> {
        match self {
            Self::Simulate(c) => Some(&mut c.reps),
            Self::Decouple(c) => Some(&mut c.reps),
            Self::DecoupleExp(c) => Some(&mut c.reps),
            Self::Exitpoint(c) => Some(&mut c.reps),
            Self::Detect(c) => Some(&mut c.reps),
            Self::RwreSpeed(c) => Some(&mut c.reps),
            Self::ExplppChecks(c) => Some(&mut c.reps),
            Self::PoissonBound(_) | Self::Schedule(_) => None,
        }
    }

    /// Applies a `--reps` override.
    pub fn set_reps(&mut self, reps: u32) -> Result<(), CliError> {
        let kind = self.kind();
        match self.reps_mut() {
            Some(r) => {
                *r = reps;
                Ok(())
            }
            None => Err(CliError::Config(format!("--reps does not apply to {kind}"))),
        }
    }

    /// Resource limits, checked before anything is sampled.
    pub fn check_limits(&self) -> Result<(), CliError> {
        let limit = |msg: String| Err(CliError::Limit(msg));
        if let Some(r) = self.clone().reps_mut() {
            if *r > MAX_REPS {
                return limit(format!("{r} replicates exceed the limit of {MAX_REPS}"));
            }
        }
        let area = |b: &SpaceTimeBox| b.width().abs() * b.height().abs();
        let boxes = |bs: &[&SpaceTimeBox], lambda: f64, reps: u32| {
            for b in bs {
                // sources and sinks add λ·width + height/λ marks
                let size = area(b) + lambda * b.width().abs() + b.height().abs() / lambda;
                if !(size <= MAX_BOX_AREA) {
                    return limit(format!("box {b:?} exceeds the area limit of {MAX_BOX_AREA}"));
                }
                if !(size * f64::from(reps) <= MAX_WORK) {
                    return limit(format!("{reps} replicates of box {b:?} exceed the work limit of {MAX_WORK}"));
                }
            }
            Ok(())
        };
        match self {
            Self::Simulate(c) => boxes(&[&c.bx], c.lambda, c.reps),
            Self::Exitpoint(c) => boxes(&[&c.bx], c.lambda, c.reps),
            Self::Decouple(c) => {
                let hull = c.b1.hull(&c.b2);
                boxes(&[&hull], c.lambda.max(c.lambda_prime), c.reps)
            }
            Self::DecoupleExp(c) => {
                let hull = c.f1.support().hull(&c.f2.support());
                let cells = (hull.x1 + 1.0) * (hull.t1 + 1.0);
                if !(cells <= MAX_GRID_CELLS as f64) {
                    return limit(format!("{cells} grid cells exceed the limit of {MAX_GRID_CELLS}"));
                }
                Ok(())
            }
            Self::Detect(c) => {
                let width = 2.0 * c.half_width as f64 + 2.0 * c.r + 3.0;
                let b = SpaceTimeBox { x0: 0.0, x1: width, t0: 0.0, t1: c.horizon as f64 + 1.0 };
                boxes(&[&b], c.lambda, c.reps)
            }
            Self::RwreSpeed(c) => {
                let h = f64::from(c.horizon);
                let b = SpaceTimeBox { x0: 0.0, x1: 3.0 * h + 5.0, t0: 0.0, t1: h + 2.0 };
                let lambda = if c.rho > 0.0 { c.rho.powf(-0.5) } else { 1.0 };
                boxes(&[&b], lambda, c.reps)
            }
            Self::ExplppChecks(c) => {
                let cells = (c.side + 1).saturating_mul(c.side + 1);
                let small = (c.enumeration_side > 0 && c.enumeration_side <= 8) || c.enumeration_grids == 0;
                if cells > MAX_GRID_CELLS || (c.increment_side + 1).pow(2) > MAX_GRID_CELLS {
                    return limit(format!("grid side {} exceeds the limit of {MAX_GRID_CELLS} cells", c.side));
                }
                if !small {
                    return limit("enumeration grids must have side 1 to 8".into());
                }
                Ok(())
            }
            Self::PoissonBound(_) => Ok(()),
            Self::Schedule(c) => {
                if c.k_max > MAX_SCHEDULE_ROWS {
                    return limit(format!("k_max {} exceeds the limit of {MAX_SCHEDULE_ROWS}", c.k_max));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse() {
        for kind in [
            "simulate",
            "decouple",
            "decouple-exp",
            "exitpoint",
            "detect",
            "rwre-speed",
            "explpp-checks",
            "poisson-bound",
            "schedule",
        ] {
            let c = ExperimentConfig::parse(&format!(r#"{{"kind": "{kind}"}}"#)).unwrap();
            assert_eq!(c.kind(), kind);
            assert_eq!(Some(c), ExperimentConfig::default_for(kind));
        }
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"kind": "simulate", "lamda": 2}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"kind": "nonsense"}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"lambda": 2}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"kind": "detect", "trigger": {"l0": 4, "x": 1}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::default_for("decouple").unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn limits() {
        let big = r#"{"kind": "simulate", "box": {"x0": 0, "x1": 1e4, "t0": 0, "t1": 1e4}}"#;
        assert!(matches!(ExperimentConfig::parse(big).unwrap().check_limits(), Err(CliError::Limit(_))));
        let mut c = ExperimentConfig::default_for("simulate").unwrap();
        c.set_reps(MAX_REPS + 1).unwrap();
        assert!(c.check_limits().is_err());
        assert!(ExperimentConfig::default_for("schedule").unwrap().set_reps(3).is_err());
        for kind in ["simulate", "decouple", "decouple-exp", "exitpoint", "detect", "rwre-speed", "explpp-checks"] {
            ExperimentConfig::default_for(kind).unwrap().check_limits().unwrap();
        }
    }
}
