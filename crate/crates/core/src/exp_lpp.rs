//! Stationary exponential last-passage percolation on the quarter lattice.
//!
//! Weights on the i-axis are Exp(1−α), on the j-axis Exp(α), in the bulk
//! Exp(1), and `w(0,0) = 0`. Rows are indexed by `j` (time) and columns by
//! `i` (space).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{combined_stderr, DecouplingReport};
use crate::error::{invalid, out_of_domain, Error, Result};
use crate::geometry::SpaceTimeBox;
use crate::harness::Runner;
use crate::rng::RandomStream;
use crate::stats::mc_estimate;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `(1−α)²/α²`: columns per row along the characteristic direction
/// `((1−α)², α²)`.
pub fn characteristic_beta(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha).powi(2) / alpha.powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpLppGrid {
    alpha: f64,
    i_max: usize,
    j_max: usize,
    /// Row-major: `weights[j * (i_max + 1) + i]`.
    weights: Vec<f64>,
}

impl ExpLppGrid {
    pub fn from_weights(alpha: f64, i_max: usize, j_max: usize, weights: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if weights.len() != (i_max + 1) * (j_max + 1) {
            return Err(invalid(format!(
                "{} weights for a {}x{} grid",
                weights.len(),
                i_max + 1,
                j_max + 1
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and non-negative"));
        }
        if weights[0] != 0.0 {
            return Err(invalid("w(0,0) must be 0"));
        }
        Ok(Self { alpha, i_max, j_max, weights })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.i_max + 1) + i
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[self.idx(i, j)]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: ExpLppGrid = serde_json::from_str(s)?;
        Self::from_weights(g.alpha, g.i_max, g.j_max, g.weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The grid at `alpha_prime > alpha` built from the same randomness:
    /// i-axis weights scaled up by `(1−α)/(1−α')`, j-axis weights scaled
    /// down by `α/α'`, bulk unchanged. Its increment process dominates
    /// this one's.
    pub fn coupled(&self, alpha_prime: f64) -> Result<ExpLppGrid> {
        check_alpha(alpha_prime)?;
        if alpha_prime <= self.alpha {
            return Err(Error::Precondition(format!(
                "coupled grid needs alpha' > alpha, got {alpha_prime} <= {}",
                self.alpha
            )));
        }
        let mut w = self.weights.clone();
        let up = (1.0 - self.alpha) / (1.0 - alpha_prime);
        let down = self.alpha / alpha_prime;
        for i in 1..=self.i_max {
            w[i] *= up;
        }
        for j in 1..=self.j_max {
            let k = self.idx(0, j);
            w[k] *= down;
        }
        Ok(ExpLppGrid { alpha: alpha_prime, weights: w, ..self.clone() })
    }
}

/// Samples a grid with columns `0..=i_max` and rows `0..=j_max`.
pub fn sample_grid(s: &mut RandomStream, alpha: f64, i_max: usize, j_max: usize) -> Result<ExpLppGrid> {
    check_alpha(alpha)?;
    let mut weights = Vec::with_capacity((i_max + 1) * (j_max + 1));
    for j in 0..=j_max {
        for i in 0..=i_max {
            let w = match (i, j) {
                (0, 0) => 0.0,
                (_, 0) => s.exponential(1.0 - alpha)?,
                (0, _) => s.exponential(alpha)?,
                _ => s.exponential(1.0)?,
            };
            weights.push(w);
        }
    }
    Ok(ExpLppGrid { alpha, i_max, j_max, weights })
}

/// Tabulated passage times `G(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GField {
    i_max: usize,
    j_max: usize,
    g: Vec<f64>,
}

/// `G(i, j) = max(G(i−1, j), G(i, j−1)) + w(i, j)`, row-major sweep.
pub fn lpp_times(grid: &ExpLppGrid) -> GField {
    let w = grid.i_max + 1;
    let mut g = vec![0.0; grid.weights.len()];
    for j in 0..=grid.j_max {
        for i in 0..=grid.i_max {
            let left = if i > 0 { g[j * w + i - 1] } else { f64::NEG_INFINITY };
            let down = if j > 0 { g[(j - 1) * w + i] } else { f64::NEG_INFINITY };
            let best = left.max(down);
            g[j * w + i] = if best == f64::NEG_INFINITY { 0.0 } else { best } + grid.weights[j * w + i];
        }
    }
    GField { i_max: grid.i_max, j_max: grid.j_max, g }
}

/// `G(·, j_max)` with two rows of storage.
pub fn top_row(grid: &ExpLppGrid) -> Vec<f64> {
    let w = grid.i_max + 1;
    let mut row = vec![0.0f64; w];
    for i in 0..w {
        row[i] = if i > 0 { row[i - 1] } else { 0.0 } + grid.weights[i];
    }
    for j in 1..=grid.j_max {
        let mut next = vec![0.0f64; w];
        for i in 0..w {
            let best = if i > 0 { next[i - 1].max(row[i]) } else { row[i] };
            next[i] = best + grid.weights[j * w + i];
        }
        row = next;
    }
    row
}

impl GField {
    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i > self.i_max || j > self.j_max {
            return Err(out_of_domain(format!("({i}, {j}) outside {}x{} grid", self.i_max + 1, self.j_max + 1)));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(self.g[j * (self.i_max + 1) + i])
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.g[j * (self.i_max + 1) + i]
    }

    /// `W_n((k, l]) = G(l, n) − G(k, n)`.
    pub fn increment(&self, n: usize, k: usize, l: usize) -> Result<f64> {
        if k > l {
            return Err(out_of_domain(format!("columns ({k}, {l}] reversed")));
        }
        Ok(self.get(l, n)? - self.get(k, n)?)
    }

    /// `G((n+x)/2, (n−x)/2 + 1) − G((n+x)/2 + 1, (n−x)/2)`.
    pub fn derivative(&self, x: i64, n: i64) -> Result<f64> {
        if (n + x).rem_euclid(2) != 0 {
            return Err(invalid(format!("x + n must be even, got x={x}, n={n}")));
        }
        let (a, b) = ((n + x) / 2, (n - x) / 2);
        if a < 0 || b < 0 {
            return Err(out_of_domain(format!("(x, n) = ({x}, {n}) maps outside the quadrant")));
        }
        let (a, b) = (a as usize, b as usize);
        Ok(self.get(a, b + 1)? - self.get(a + 1, b)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    I,
    J,
}

/// Last axis cell of the maximal path. `signed` is `+index` on the i-axis
/// and `−index` on the j-axis; the origin counts as the i-axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpExitRecord {
    pub axis: Axis,
    pub index: usize,
    pub signed: i64,
}

/// Backtracks the maximal path from `(k, n)` to the first axis cell. Ties
/// step down, toward the i-axis.
pub fn exp_exit_point(g: &GField, k: usize, n: usize) -> Result<ExpExitRecord> {
    g.check(k, n)?;
    let (mut i, mut j) = (k, n);
    while i > 0 && j > 0 {
        if g.at(i, j - 1) >= g.at(i - 1, j) {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    Ok(if j == 0 {
        ExpExitRecord { axis: Axis::I, index: i, signed: i as i64 }
    } else {
        ExpExitRecord { axis: Axis::J, index: j, signed: -(j as i64) }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpFunctionKind {
    /// 1 if some row in the window has `W_n((k, l]) ≥ level`.
    IncrementAtLeast { level: f64 },
    /// 1 if some row in the window has `W_n((k, l]) ≤ level`.
    IncrementAtMost { level: f64 },
    Constant { value: f64 },
}

/// A [0, 1]-valued monotone function of the increment process on columns
/// `(k, l]` over rows `rows.0..=rows.1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpFunctionSpec {
    pub kind: ExpFunctionKind,
    pub columns: (usize, usize),
    pub rows: (usize, usize),
}

impl ExpFunctionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.columns.0 >= self.columns.1 || self.rows.0 > self.rows.1 {
            return Err(invalid(format!("malformed function support {self:?}")));
        }
        if let ExpFunctionKind::Constant { value } = self.kind {
            if !(0.0..=1.0).contains(&value) {
                return Err(invalid(format!("constant {value} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn non_decreasing(&self) -> Option<bool> {
        match self.kind {
            ExpFunctionKind::IncrementAtLeast { .. } => Some(true),
            ExpFunctionKind::IncrementAtMost { .. } => Some(false),
            ExpFunctionKind::Constant { .. } => None,
        }
    }

    /// Support as a box in (column, row) coordinates.
    pub fn support(&self) -> SpaceTimeBox {
        SpaceTimeBox {
            x0: self.columns.0 as f64,
            x1: self.columns.1 as f64,
            t0: self.rows.0 as f64,
            t1: self.rows.1 as f64,
        }
    }

    /// Evaluates on a field whose cell `(0, 0)` sits at `origin`.
    pub fn evaluate(&self, g: &GField, origin: (usize, usize)) -> Result<f64> {
        if let ExpFunctionKind::Constant { value } = self.kind {
            return Ok(value);
        }
        let shift = |v: usize, o: usize| {
            v.checked_sub(o).ok_or_else(|| out_of_domain(format!("{v} below grid origin {o}")))
        };
        let (k, l) = (shift(self.columns.0, origin.0)?, shift(self.columns.1, origin.0)?);
        let (r0, r1) = (shift(self.rows.0, origin.1)?, shift(self.rows.1, origin.1)?);
        let mut hit = false;
        for n in r0..=r1 {
            let w = g.increment(n, k, l)?;
            hit |= match self.kind {
                ExpFunctionKind::IncrementAtLeast { level } => w >= level,
                ExpFunctionKind::IncrementAtMost { level } => w <= level,
                ExpFunctionKind::Constant { .. } => unreachable!(),
            };
        }
        Ok(f64::from(u8::from(hit)))
    }
}

/// Monte-Carlo check of `E^α[f1 f2] ≤ E^α[f1]·E^α'[f2] + 2·(combined
/// stderr)` for the increment process. Increments have mean `1/(1−α)`,
/// so a larger α means a larger process: non-decreasing functions need
/// `α < α'` and non-increasing ones `α' < α`.
///
/// The left side uses one grid whose origin is the lower-left corner of the
/// hull of both supports; each factor uses a grid whose origin is the
/// lower-left corner of its own support. Stationarity of the increments
/// makes all three placements equal in law to the process seen from the
/// lattice origin. The report's density fields carry α and α', and its
/// `epsilon` is `|β(α) − β(α')|`.
pub fn decoupling_check_exp(
    runner: &Runner,
    seed: u64,
    experiment: u32,
    f1: &ExpFunctionSpec,
    f2: &ExpFunctionSpec,
    alpha: f64,
    alpha_prime: f64,
    reps: u32,
) -> Result<DecouplingReport> {
    check_alpha(alpha)?;
    check_alpha(alpha_prime)?;
    let wanted = if alpha < alpha_prime {
        true
    } else if alpha_prime < alpha {
        false
    } else {
        return Err(Error::InvalidConfiguration("alpha and alpha' must differ".into()));
    };
    for f in [f1, f2] {
        f.validate()?;
        if let Some(d) = f.non_decreasing() {
            if d != wanted {
                return Err(Error::InvalidConfiguration(format!(
                    "{:?} has the wrong monotonicity for alpha={alpha}, alpha'={alpha_prime}",
                    f.kind
                )));
            }
        }
    }
    if reps < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: reps as usize });
    }
    let (s1, s2) = (f1.support(), f2.support());
    let hull = s1.hull(&s2);
    let origin_of = |b: &SpaceTimeBox| (b.x0 as usize, b.t0 as usize);
    let extent = |b: &SpaceTimeBox| ((b.x1 - b.x0) as usize, (b.t1 - b.t0) as usize);
    let samples = runner.run(seed, experiment, reps, |s| {
        let (hi, hj) = extent(&hull);
        let joint = lpp_times(&sample_grid(&mut s.fork(0), alpha, hi, hj)?);
        let prod = f1.evaluate(&joint, origin_of(&hull))? * f2.evaluate(&joint, origin_of(&hull))?;
        let (i1, j1) = extent(&s1);
        let g1 = lpp_times(&sample_grid(&mut s.fork(1), alpha, i1, j1)?);
        let (i2, j2) = extent(&s2);
        let g2 = lpp_times(&sample_grid(&mut s.fork(2), alpha_prime, i2, j2)?);
        Ok((prod, f1.evaluate(&g1, origin_of(&s1))?, f2.evaluate(&g2, origin_of(&s2))?))
    })?;
    let lhs = mc_estimate(&samples.iter().map(|v| v.0).collect::<Vec<_>>())?;
    let e1 = mc_estimate(&samples.iter().map(|v| v.1).collect::<Vec<_>>())?;
    let e2 = mc_estimate(&samples.iter().map(|v| v.2).collect::<Vec<_>>())?;
    let rhs = e1.mean * e2.mean;
    let se = combined_stderr(&lhs, &e1, &e2);
    Ok(DecouplingReport {
        density: alpha,
        density_prime: alpha_prime,
        epsilon: (characteristic_beta(alpha)? - characteristic_beta(alpha_prime)?).abs(),
        distance: s1.distance(&s2),
        per1: s1.per(),
        per2: s2.per(),
        lhs,
        f1: e1,
        f2: e2,
        rhs,
        combined_stderr: se,
        pass: lhs.mean <= rhs + 2.0 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_exp_exit, brute_force_exp_lpp};

    fn fixed_grid(i_max: usize, j_max: usize, seed: u64) -> ExpLppGrid {
        sample_grid(&mut RandomStream::new(seed, 0), 0.4, i_max, j_max).unwrap()
    }

    #[test]
    fn beta_values() {
        assert_eq!(characteristic_beta(0.5).unwrap(), 1.0);
        assert!((characteristic_beta(2.0 / 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(characteristic_beta(1.0).is_err());
    }

    #[test]
    fn single_cell_and_zero_weights() {
        let g = fixed_grid(0, 0, 1);
        assert_eq!(lpp_times(&g).get(0, 0).unwrap(), 0.0);
        let z = ExpLppGrid::from_weights(0.5, 3, 2, vec![0.0; 12]).unwrap();
        let f = lpp_times(&z);
        assert!((0..=2).all(|j| (0..=3).all(|i| f.get(i, j).unwrap() == 0.0)));
        assert!(sample_grid(&mut RandomStream::new(0, 0), 0.0, 2, 2).is_err());
    }

    #[test]
    fn bottom_row_is_a_prefix_sum() {
        let g = fixed_grid(6, 3, 2);
        let f = lpp_times(&g);
        let mut acc = 0.0;
        for i in 0..=6 {
            acc += g.weight(i, 0);
            assert!((f.get(i, 0).unwrap() - acc).abs() < 1e-12);
        }
        assert_eq!(top_row(&g), (0..=6).map(|i| f.get(i, 3).unwrap()).collect::<Vec<_>>());
    }

    #[test]
    fn recursion_and_enumeration() {
        let g = fixed_grid(5, 5, 3);
        let f = lpp_times(&g);
        for j in 0..=5 {
            for i in 0..=5 {
                let want = brute_force_exp_lpp(&g, i, j);
                assert!((f.get(i, j).unwrap() - want).abs() < 1e-12);
                assert_eq!(exp_exit_point(&f, i, j).unwrap(), brute_force_exp_exit(&g, i, j));
            }
        }
    }

    #[test]
    fn exit_on_the_bottom_row() {
        let f = lpp_times(&fixed_grid(4, 2, 4));
        assert_eq!(exp_exit_point(&f, 3, 0).unwrap(), ExpExitRecord { axis: Axis::I, index: 3, signed: 3 });
        assert!(exp_exit_point(&f, 5, 0).is_err());
    }

    #[test]
    fn increments_and_derivative() {
        let g = fixed_grid(9, 9, 5);
        let f = lpp_times(&g);
        assert_eq!(f.increment(3, 4, 4).unwrap(), 0.0);
        let adj: f64 = (2..7).map(|k| f.increment(3, k, k + 1).unwrap()).sum();
        assert!((f.increment(3, 2, 7).unwrap() - adj).abs() < 1e-12);
        assert!(f.increment(3, 5, 4).is_err());
        assert!(f.derivative(1, 2).is_err());
        let d = f.derivative(0, 2).unwrap();
        assert_eq!(d, f.get(1, 2).unwrap() - f.get(2, 1).unwrap());
        for n in 0..9i64 {
            for x in -n..=n {
                if (x + n) % 2 == 0 {
                    assert!(f.derivative(x, n).unwrap().is_finite());
                }
            }
        }
    }

    #[test]
    fn derivative_by_hand() {
        // 4x4 weights, row-major, w(0,0) = 0
        #[rustfmt::skip]
        let w = vec![
            0.0, 1.0, 2.0, 0.5,
            3.0, 1.0, 0.2, 0.1,
            0.5, 4.0, 1.0, 0.3,
            0.2, 0.1, 0.1, 2.0,
        ];
        let g = ExpLppGrid::from_weights(0.5, 3, 3, w).unwrap();
        let f = lpp_times(&g);
        // G(1,2) = max(G(0,2), G(1,1)) + 4 = max(3.5, 4.0) + 4 = 8
        // G(2,1) = max(G(1,1), G(2,0)) + 0.2 = max(4.0, 3.0) + 0.2 = 4.2
        assert!((f.derivative(0, 2).unwrap() - 3.8).abs() < 1e-12);
    }

    #[test]
    fn boundary_and_bulk_means() {
        let mut s = RandomStream::new(6, 6);
        let reps = 10_000;
        let (mut bi, mut bj, mut bulk) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let g = sample_grid(&mut s, 0.5, 1, 1).unwrap();
            bi += g.weight(1, 0);
            bj += g.weight(0, 1);
            bulk += g.weight(1, 1);
        }
        let n = f64::from(reps);
        // Exp(1/2) has sd 2, Exp(1) sd 1
        assert!((bi / n - 2.0).abs() < 3.0 * 2.0 / n.sqrt());
        assert!((bj / n - 2.0).abs() < 3.0 * 2.0 / n.sqrt());
        assert!((bulk / n - 1.0).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn coupled_grid_dominates() {
        for r in 0..50 {
            let g = sample_grid(&mut RandomStream::for_replicate(7, 0, r), 0.4, 12, 12).unwrap();
            let h = g.coupled(0.55).unwrap();
            let (f, fh) = (lpp_times(&g), lpp_times(&h));
            for n in 0..=12 {
                for k in 0..12 {
                    assert!(f.increment(n, k, k + 1).unwrap() <= fh.increment(n, k, k + 1).unwrap() + 1e-12);
                }
            }
        }
        assert!(fixed_grid(2, 2, 1).coupled(0.3).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = fixed_grid(3, 4, 8);
        assert_eq!(ExpLppGrid::from_json(&g.to_json().unwrap()).unwrap(), g);
    }

    #[test]
    fn trivial_decoupling() {
        let runner = Runner::new(1).unwrap();
        let sup = |c: (usize, usize), r: (usize, usize), kind| ExpFunctionSpec { kind, columns: c, rows: r };
        let zero = sup((0, 3), (0, 3), ExpFunctionKind::Constant { value: 0.0 });
        let one1 = sup((0, 3), (0, 3), ExpFunctionKind::Constant { value: 1.0 });
        let one2 = sup((0, 3), (20, 23), ExpFunctionKind::Constant { value: 1.0 });
        let r = decoupling_check_exp(&runner, 0, 0, &zero, &one2, 0.5, 0.45, 10).unwrap();
        assert!(r.pass && r.lhs.mean == 0.0);
        let r = decoupling_check_exp(&runner, 0, 0, &one1, &one2, 0.5, 0.45, 10).unwrap();
        assert!(r.pass && r.combined_stderr == 0.0 && r.rhs == 1.0);
        let up = sup((0, 3), (0, 3), ExpFunctionKind::IncrementAtLeast { level: 3.0 });
        assert!(decoupling_check_exp(&runner, 0, 0, &up, &one2, 0.5, 0.45, 10).is_err());
    }
}
