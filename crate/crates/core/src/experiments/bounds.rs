//! Deterministic checks: Poisson tails against their bound, the Chernoff
//! function `h`, and the two scale schedules.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::CheckCount;
use crate::detection::{detection_schedule, ScaleRow};
use crate::error::Result;
use crate::oracle::chernoff_h_quadrature;
use crate::rwre::{rwre_schedule, ScheduleTable};
use crate::stats::{chernoff_g, chernoff_h, poisson_tail_bound, poisson_tail_exact, TailSide};

pub const GRID_LAMBDAS: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 50.0];

/// `x_i = 5λ·10^{−3(1 − i/19)}`, `i = 0..20`: 20 log-spaced points in
/// `(0, 5λ]`.
pub fn grid_offsets(lambda: f64) -> Vec<f64> {
    (0..20).map(|i| 5.0 * lambda * 10f64.powf(-3.0 * (1.0 - f64::from(i) / 19.0))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub lambda: f64,
    pub x: f64,
    pub upper: f64,
    pub lower: f64,
    pub bound: f64,
}

impl TailPoint {
    pub fn holds(&self) -> bool {
        self.upper <= self.bound && self.lower <= self.bound
    }
}

/// Both exact tails and the bound at every `λ` in `lambdas` and its 20
/// offsets.
pub fn poisson_grid(lambdas: &[f64]) -> Result<Vec<TailPoint>> {
    let mut out = Vec::new();
    for &lambda in lambdas {
        for x in grid_offsets(lambda) {
            out.push(TailPoint {
                lambda,
                x,
                upper: poisson_tail_exact(lambda, x, TailSide::Upper)?,
                lower: poisson_tail_exact(lambda, x, TailSide::Lower)?,
                bound: poisson_tail_bound(lambda, x)?,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    /// `h` non-increasing, non-negative; `g = (1+x)h` non-decreasing;
    /// `h(x) ≥ 1/(1+x)` for `x ≥ 0`.
    pub shape: CheckCount,
    /// Largest gap between the closed form and the integral form.
    pub max_quadrature_error: f64,
}

/// Shape checks on a grid of step 10⁻³ over `[−1, 10]` and the closed form
/// against quadrature on 221 points of `[−0.999, 10]`.
pub fn chernoff_checks() -> Result<ChernoffReport> {
    let xs: Vec<f64> = (0..=11_000).map(|i| -1.0 + f64::from(i) * 1e-3).collect();
    let h = xs.iter().map(|x| chernoff_h(*x)).collect::<Result<Vec<_>>>()?;
    let g = xs.iter().map(|x| chernoff_g(*x)).collect::<Result<Vec<_>>>()?;
    let mut shape = CheckCount::default();
    let mut check = |ok: bool| {
        shape.checks += 1;
        shape.failures += u64::from(!ok);
    };
    for i in 0..xs.len() {
        check(h[i] >= 0.0);
        if xs[i] >= 0.0 {
            check(h[i] >= 1.0 / (1.0 + xs[i]));
        }
        if i > 0 {
            check(h[i] <= h[i - 1]);
            check(g[i] >= g[i - 1]);
        }
    }
    let mut max_err: f64 = 0.0;
    for i in 0..=220 {
        let x = -0.999 + f64::from(i) * (10.999 / 220.0);
        max_err = max_err.max((chernoff_h(x)? - chernoff_h_quadrature(x)).abs());
    }
    Ok(ChernoffReport { shape, max_quadrature_error: max_err })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub detection: Vec<ScaleRow>,
    pub growth_sandwich: Vec<bool>,
    pub height_sandwich: Vec<bool>,
    pub walk: ScheduleTable,
}

fn ten_to(e: u32) -> BigUint {
    BigUint::from(10u32).pow(e)
}

/// The crossing scales from `l_0 = 10^100` up to `k = 10` and the walk
/// scales from `L_0 = 10^10`. The walk table uses `ρ = 0.3`, `δ = 0.05`,
/// `C1 = 1`, `ρ_c^- = 0.5`, `v_target = 0.6`.
pub fn schedules() -> Result<ScheduleReport> {
    let detection = detection_schedule(&ten_to(100), 10)?;
    let growth_sandwich = detection.windows(2).map(|w| w[0].growth_sandwich(&w[1])).collect();
    let height_sandwich = detection.iter().map(ScaleRow::height_sandwich).collect();
    let walk = rwre_schedule(&ten_to(10), 0.3, 0.05, 1.0, 0.5, 0.6, 12)?;
    Ok(ScheduleReport { detection, growth_sandwich, height_sandwich, walk })
}

impl ScheduleReport {
    /// Row 0 of both tables, every growth sandwich and the height sandwich
    /// from `k = 2` on. At `k = 1` the height factor is `5/2 > 2`.
    pub fn pass(&self) -> bool {
        let d0 = &self.detection[0];
        let w0 = &self.walk.rows[0];
        d0.l == ten_to(100)
            && d0.big_l == ten_to(100) * 3u32 / 2u32
            && self.growth_sandwich.iter().all(|b| *b)
            && self.height_sandwich.iter().enumerate().all(|(k, b)| *b || k == 1)
            && w0.big_l == ten_to(10)
            && w0.l == BigUint::from(316u32)
            && (w0.epsilon - 0.23714).abs() < 1e-5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_dominates_the_tails() {
        let g = poisson_grid(&GRID_LAMBDAS).unwrap();
        assert_eq!(g.len(), 120);
        assert!(g.iter().all(TailPoint::holds));
        let x = grid_offsets(2.0);
        assert!((x[19] - 10.0).abs() < 1e-12 && (x[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn chernoff_shape_and_quadrature() {
        let r = chernoff_checks().unwrap();
        assert!(r.shape.passed() && r.shape.checks > 40_000);
        assert!(r.max_quadrature_error <= 1e-10, "{r:?}");
    }

    #[test]
    fn schedule_rows() {
        let r = schedules().unwrap();
        assert!(r.pass());
        assert_eq!(r.detection.len(), 11);
        assert!(!r.height_sandwich[1]);
    }
}
