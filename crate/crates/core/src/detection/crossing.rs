use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{openness_grid, ScaleRow, SiteGrid, SiteWindow};
use crate::error::{invalid, out_of_domain, Result};
use crate::hammersley::{check_lambda, evolve_particles, sample_box_environment};
use crate::harness::Runner;
use crate::stats::{mc_estimate, McEstimate};

/// Largest `l + L` accepted for a crossing computation.
const MAX_EXTENT: i64 = 1 << 16;

/// `A = [0, l]×[0, L] ∪ [l, l+L]×[L, l+L]` placed at `origin`, in
/// (space, time) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingGeometry {
    pub l: i64,
    pub big_l: i64,
    #[serde(default)]
    pub origin: (i64, i64),
}

impl CrossingGeometry {
    pub fn from_row(row: &ScaleRow) -> Result<Self> {
        let conv = |v: &num_bigint::BigUint| {
            v.to_i64().filter(|v| *v <= MAX_EXTENT).ok_or_else(|| invalid(format!("scale {v} too large for a site grid")))
        };
        let g = Self { l: conv(&row.l)?, big_l: conv(&row.big_l)?, origin: (0, 0) };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 || self.big_l < 1 || self.l + self.big_l > MAX_EXTENT {
            return Err(invalid(format!("bad crossing geometry {self:?}")));
        }
        Ok(())
    }

    /// Side of the square `B = [0, l+L]²`.
    pub fn extent(&self) -> i64 {
        self.l + self.big_l
    }

    /// Site window covering `B`.
    pub fn window(&self) -> SiteWindow {
        SiteWindow {
            x_lo: self.origin.0,
            x_hi: self.origin.0 + self.extent(),
            n_lo: self.origin.1,
            n_hi: self.origin.1 + self.extent(),
            delta_s: 1.0,
            delta_t: 1.0,
        }
    }

    /// The two rectangles as `(x_lo, x_hi, t_lo, t_hi)`, relative to the
    /// origin.
    pub fn rects(&self) -> [(i64, i64, i64, i64); 2] {
        let (l, m) = (self.l, self.big_l);
        [(0, l, 0, m), (l, l + m, m, l + m)]
    }
}

/// Closed interval of scaled parameters `τ·scale ∈ [0, scale]` for which
/// the segment from `(x, n)` with slope `d` per unit time lies in `rect`.
fn param_interval(x: i64, n: i64, d: i64, scale: i64, rect: (i64, i64, i64, i64)) -> Option<(i64, i64)> {
    let (xa, xb, ta, tb) = rect;
    let mut lo = ((ta - n) * scale).max(0);
    let mut hi = ((tb - n) * scale).min(scale);
    let (a, b) = match d.signum() {
        0 if (xa..=xb).contains(&x) => (0, scale),
        0 => return None,
        1 => (xa - x, xb - x),
        _ => (x - xb, x - xa),
    };
    lo = lo.max(a);
    hi = hi.min(b);
    (lo <= hi).then_some((lo, hi))
}

/// Whether `[0, upto]` is covered by the union of closed intervals.
fn covered(mut parts: Vec<(i64, i64)>, upto: i64) -> bool {
    parts.sort_unstable();
    let mut reach = 0;
    let mut started = false;
    for (lo, hi) in parts {
        if lo > reach || (!started && lo > 0) {
            break;
        }
        started = true;
        reach = reach.max(hi);
        if reach >= upto {
            return true;
        }
    }
    started && reach >= upto
}

/// Whether an open path with steps `(r, 1)`, `|r| ≤ range`, starts on the
/// bottom edge `[0, l]×{0}`, keeps its linear interpolation inside `A`,
/// and reaches the right edge `{l+L}×[L, l+L]`. Sites the path visits up to
/// (and including, if it lands there) the exit point must be open.
pub fn crossing_exists(g: &SiteGrid, geom: &CrossingGeometry, range: u64) -> Result<bool> {
    geom.validate()?;
    let need = geom.window();
    let have = g.window();
    if need.x_lo < have.x_lo || need.x_hi > have.x_hi || need.n_lo < have.n_lo || need.n_hi > have.n_hi {
        return Err(out_of_domain(format!("grid {have:?} does not cover the crossing box {need:?}")));
    }
    let (ox, on) = geom.origin;
    let open = |x: i64, n: i64| g.is_open(ox + x, on + n);
    let ext = geom.extent();
    let (l, m) = (geom.l, geom.big_l);
    let range = i64::try_from(range).unwrap_or(i64::MAX).min(ext);
    let rects = geom.rects();
    let mut cur: Vec<bool> = (0..=ext).map(|x| x <= l && open(x, 0)).collect();
    for n in 0..ext {
        let mut next = vec![false; (ext + 1) as usize];
        let mut any = false;
        for x in (0..=ext).filter(|x| cur[*x as usize]) {
            for y in (x - range).max(0)..=x + range {
                let d = y - x;
                let scale = d.abs().max(1);
                let parts: Vec<_> = rects.iter().filter_map(|r| param_interval(x, n, d, scale, *r)).collect();
                if d > 0 && y >= ext {
                    // exit line hit at τ = (ext − x)/d, inside the time span [L, l+L]; the
                    // landing site only matters when τ = 1
                    let hit = ext - x;
                    let in_span = hit >= (m - n) * scale && hit <= (l + m - n) * scale;
                    if in_span && covered(parts.clone(), hit) && (hit < scale || open(y, n + 1)) {
                        return Ok(true);
                    }
                }
                if y <= ext && !next[y as usize] && open(y, n + 1) && covered(parts, scale) {
                    next[y as usize] = true;
                    any = true;
                }
            }
        }
        if !any {
            return Ok(false);
        }
        cur = next;
    }
    Ok(false)
}

/// Whether an open path with jumps up to `range` climbs from row 0 to row
/// `L` while staying in columns `0..=l`.
pub fn vertical_crossing_exists(g: &SiteGrid, geom: &CrossingGeometry, range: u64) -> Result<bool> {
    geom.validate()?;
    let (ox, on) = geom.origin;
    if !g.contains(ox, on) || !g.contains(ox + geom.l, on + geom.big_l) {
        return Err(out_of_domain(format!("grid {:?} does not cover the lower block of {geom:?}", g.window())));
    }
    let range = i64::try_from(range).unwrap_or(i64::MAX).min(geom.l);
    let mut cur: Vec<bool> = (0..=geom.l).map(|x| g.is_open(ox + x, on)).collect();
    for n in 1..=geom.big_l {
        cur = (0..=geom.l)
            .map(|y| {
                g.is_open(ox + y, on + n) && ((y - range).max(0)..=(y + range).min(geom.l)).any(|x| cur[x as usize])
            })
            .collect();
    }
    Ok(cur.iter().any(|c| *c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    pub k: u32,
    pub l: i64,
    pub big_l: i64,
    pub n_jump: i64,
    pub lambda: f64,
    pub r: f64,
    /// Estimated probability that no open crossing of `A` exists.
    pub p_hat: McEstimate,
    /// Estimated probability that no open vertical crossing of the lower
    /// block `[0, l]×[0, L]` exists.
    pub p_vertical: McEstimate,
    /// `l^{-4}`.
    pub threshold: f64,
    /// `(L+1)·(1 − e^{−2r(λ+1)})^{⌊l/2r⌋}`, an upper bound for
    /// `p_vertical`.
    pub bound: f64,
    pub holds: bool,
}

/// Estimates the probability of no open crossing of `A` with jumps up to
/// `N = L + l + 1`, on grids built from sampled environments at `lambda`,
/// and compares it to `l^{-4}`. Meant for small `l0` only.
///
/// Every crossing of `A` passes through the inner corner `(l, L)`: below
/// row `L` the interpolated path must stay in columns `≤ l` and above it in
/// columns `≥ l`. So `p_hat` is at least the probability that this one site
/// is closed, and is reported next to `p_vertical`, the probability that
/// the lower block alone has no vertical crossing.
pub fn estimate_trigger(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    row: &ScaleRow,
    lambda: f64,
    r: f64,
    reps: u32,
) -> Result<TriggerReport> {
    check_lambda(lambda)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let geom = CrossingGeometry::from_row(row)?;
    let window = geom.window();
    let mut bx = window.required_box(r);
    bx.x0 -= 1.0;
    bx.x1 += 1.0;
    let n_jump = geom.extent() + 1;
    let misses = runner.run(seed, experiment, reps, |s| {
        let env = sample_box_environment(&s, lambda, bx)?;
        let g = openness_grid(&evolve_particles(&env), r, window)?;
        let full = crossing_exists(&g, &geom, n_jump as u64)?;
        let vertical = vertical_crossing_exists(&g, &geom, n_jump as u64)?;
        Ok((f64::from(u8::from(!full)), f64::from(u8::from(!vertical))))
    })?;
    let p_hat = mc_estimate(&misses.iter().map(|m| m.0).collect::<Vec<_>>())?;
    let p_vertical = mc_estimate(&misses.iter().map(|m| m.1).collect::<Vec<_>>())?;
    let threshold = (geom.l as f64).powi(-4);
    let q = -(-2.0 * r * (lambda + 1.0)).exp_m1();
    let bound = (geom.big_l as f64 + 1.0) * q.powf((geom.l as f64 / (2.0 * r)).floor());
    Ok(TriggerReport {
        k: row.k,
        l: geom.l,
        big_l: geom.big_l,
        n_jump,
        lambda,
        r,
        holds: p_hat.mean <= threshold,
        p_hat,
        p_vertical,
        threshold,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::detection_schedule;
    use crate::oracle::brute_force_crossing;
    use crate::rng::RandomStream;
    use num_bigint::BigUint;

    fn geom(l0: u32, k: u32) -> CrossingGeometry {
        let rows = detection_schedule(&BigUint::from(l0), k).unwrap();
        CrossingGeometry::from_row(&rows[k as usize]).unwrap()
    }

    fn grid(g: &CrossingGeometry, f: impl FnMut(i64, i64) -> bool) -> SiteGrid {
        SiteGrid::from_fn(g.window(), f).unwrap()
    }

    #[test]
    fn coverage_of_closed_intervals() {
        assert!(covered(vec![(0, 2), (2, 5)], 5));
        assert!(!covered(vec![(0, 2), (3, 5)], 5));
        assert!(!covered(vec![(1, 5)], 5));
        assert!(covered(vec![(0, 0)], 0));
        assert!(!covered(vec![], 0));
    }

    #[test]
    fn all_closed_has_no_crossing() {
        let g = geom(4, 1);
        assert!(!crossing_exists(&grid(&g, |_, _| false), &g, 100).unwrap());
    }

    #[test]
    fn all_open_crosses_with_the_full_jump_range() {
        for (l0, k) in [(4, 0), (4, 1), (6, 0), (2, 2)] {
            let g = geom(l0, k);
            let n = (g.extent() + 1) as u64;
            assert!(crossing_exists(&grid(&g, |_, _| true), &g, n).unwrap(), "l0={l0} k={k}");
        }
    }

    #[test]
    fn the_path_must_pass_the_inner_corner() {
        // Below L the interpolation stays in x ≤ l, above it in x ≥ l, so
        // every crossing visits (l, L).
        let g = geom(4, 1);
        let (l, m) = (g.l, g.big_l);
        let sites = grid(&g, |x, n| (x, n) != (l, m));
        assert!(!crossing_exists(&sites, &g, 100).unwrap());
    }

    #[test]
    fn unit_jumps_cannot_cross_the_top_block_in_time() {
        // from (l, L), reaching x = l+L needs L columns in at most l rows
        let g = geom(4, 0);
        assert!(!crossing_exists(&grid(&g, |_, _| true), &g, 1).unwrap());
    }

    #[test]
    fn matches_enumeration_on_small_scales() {
        let mut s = RandomStream::new(21, 0);
        for (l0, k) in [(2, 0), (3, 0), (4, 0), (5, 0), (6, 0), (2, 1), (3, 1)] {
            let g = geom(l0, k);
            let n_max = (g.extent() + 1) as u64;
            for _ in 0..10 {
                let p = s.uniform_in(0.35, 0.85);
                let sites = grid(&g, |_, _| s.bernoulli(p));
                for range in [1, 2, 3, n_max / 2, n_max] {
                    assert_eq!(
                        crossing_exists(&sites, &g, range).unwrap(),
                        brute_force_crossing(&sites, &g, range),
                        "l0={l0} k={k} range={range}"
                    );
                }
            }
        }
    }

    #[test]
    fn vertical_crossing_on_small_grids() {
        let g = geom(4, 0);
        assert!(vertical_crossing_exists(&grid(&g, |_, _| true), &g, 0).unwrap());
        // one open site per row, far apart
        let zigzag = grid(&g, |x, n| x == if n % 2 == 0 { 0 } else { 4 });
        assert!(!vertical_crossing_exists(&zigzag, &g, 3).unwrap());
        assert!(vertical_crossing_exists(&zigzag, &g, 4).unwrap());
        // a full crossing implies a vertical one
        let mut s = RandomStream::new(8, 0);
        for _ in 0..100 {
            let sites = grid(&g, |_, _| s.bernoulli(0.6));
            if crossing_exists(&sites, &g, 17).unwrap() {
                assert!(vertical_crossing_exists(&sites, &g, 17).unwrap());
            }
        }
    }

    #[test]
    fn grid_must_cover_the_box() {
        let g = geom(4, 0);
        let small = SiteGrid::from_fn(SiteWindow::new(0, 3, 0, 3).unwrap(), |_, _| true).unwrap();
        assert!(crossing_exists(&small, &g, 3).is_err());
    }

    #[test]
    fn trigger_estimate_respects_the_bound() {
        let runner = Runner::new(1).unwrap();
        let rows = detection_schedule(&BigUint::from(6u32), 0).unwrap();
        let rep = estimate_trigger(&runner, 3, 0, &rows[0], 0.5, 0.1, 100).unwrap();
        assert_eq!(rep.n_jump, 16);
        assert!(rep.p_vertical.mean <= rep.bound + 3.0 * rep.p_vertical.stderr + 1e-12);
        assert!(rep.p_vertical.mean <= rep.p_hat.mean);
        // the corner site alone is closed with probability 1 − e^{−2r(λ+1)}
        let corner = 1.0 - (-0.3f64).exp();
        assert!(rep.p_hat.mean >= corner - 3.0 * (corner * (1.0 - corner) / 100.0).sqrt());
        assert!(!rep.holds);
    }
}
