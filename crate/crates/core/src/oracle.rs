//! Slow, independent reference computations. The tests and the acceptance
//! suite compare the fast algorithms against these.

use crate::detection::{CrossingGeometry, SiteGrid};
use crate::exp_lpp::{Axis, ExpExitRecord, ExpLppGrid};
use crate::hammersley::{BoxEnvironment, ExitPointRecord, ParticleHistory};

/// Longest chain strictly increasing in both coordinates, by checking every
/// subset. Exponential; meant for at most ~15 points.
pub fn brute_force_chain(points: &[(f64, f64)]) -> usize {
    let n = points.len();
    assert!(n <= 20, "subset enumeration over {n} points");
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let mut chosen: Vec<(f64, f64)> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect();
        if chosen.len() <= best {
            continue;
        }
        chosen.sort_by(|a, b| a.0.total_cmp(&b.0));
        if chosen.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1) {
            best = chosen.len();
        }
    }
    best
}

fn sorted_candidates(mut v: Vec<f64>) -> Vec<(f64, bool)> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = Vec::with_capacity(2 * v.len());
    for (i, b) in v.iter().enumerate() {
        if i > 0 {
            out.push((0.5 * (v[i - 1] + b), true));
        }
        out.push((*b, false));
    }
    out
}

/// Value and exit point of the maximal paths to `(x, t)` by evaluating the
/// boundary profile at every breakpoint and every midpoint between
/// breakpoints, with bulk chains found by subset enumeration.
pub fn brute_force_exit(env: &BoxEnvironment, x: f64, t: f64, use_sinks: bool) -> ExitPointRecord {
    let bx = env.bx();
    let clocks: Vec<(f64, f64)> = env
        .clocks()
        .points()
        .iter()
        .copied()
        .filter(|(cx, ct)| *cx <= x && *ct <= t)
        .collect();
    let bulk_after = |u: f64, s: f64| {
        let allowed: Vec<(f64, f64)> = clocks.iter().copied().filter(|(cx, ct)| *cx > u && *ct > s).collect();
        brute_force_chain(&allowed) as u64
    };

    let src: Vec<f64> = env.sources().coords().iter().copied().filter(|s| *s <= x).collect();
    let mut src_eval: Vec<(f64, bool, u64)> = Vec::new();
    if x > bx.x0 {
        let mut bps = vec![bx.x0, x];
        bps.extend(&src);
        bps.extend(clocks.iter().map(|c| c.0));
        for (u, mid) in sorted_candidates(bps) {
            let m = src.iter().filter(|s| **s <= u).count() as u64;
            src_eval.push((u, mid, m + bulk_after(u, bx.t0)));
        }
    }
    let snk: Vec<f64> = if use_sinks {
        env.sinks().coords().iter().copied().filter(|s| *s <= t).collect()
    } else {
        Vec::new()
    };
    let mut levels = vec![bx.t0, t];
    levels.extend(&snk);
    levels.extend(clocks.iter().map(|c| c.1));
    let snk_eval: Vec<(f64, u64)> = sorted_candidates(levels)
        .into_iter()
        .map(|(s, _)| (s, snk.iter().filter(|v| **v <= s).count() as u64 + bulk_after(bx.x0, s)))
        .collect();

    let value = src_eval
        .iter()
        .map(|e| e.2)
        .chain(snk_eval.iter().map(|e| e.1))
        .max()
        .unwrap_or(0);
    // the piece left of a midpoint's right neighbour shares its value, so a
    // maximizing midpoint means the supremum is that neighbour
    if let Some(i) = src_eval.iter().rposition(|e| e.2 == value && e.0 > bx.x0) {
        let u = if src_eval[i].1 { src_eval[i + 1].0 } else { src_eval[i].0 };
        return ExitPointRecord { z: u - bx.x0, value };
    }
    let s = snk_eval.iter().find(|e| e.1 == value).map(|e| e.0).expect("non-empty levels");
    ExitPointRecord { z: -(s - bx.t0), value }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// `h(x) = ∫₀¹ 2(1−s)/(1+sx) ds` by quadrature.
pub fn chernoff_h_quadrature(x: f64) -> f64 {
    adaptive_simpson(&|s| 2.0 * (1.0 - s) / (1.0 + s * x), 0.0, 1.0, 1e-13)
}

fn for_each_lattice_path(i: usize, j: usize, path: &mut Vec<(usize, usize)>, visit: &mut dyn FnMut(&[(usize, usize)])) {
    let (ci, cj) = *path.last().expect("path starts at the origin");
    if (ci, cj) == (i, j) {
        visit(path);
        return;
    }
    if ci < i {
        path.push((ci + 1, cj));
        for_each_lattice_path(i, j, path, visit);
        path.pop();
    }
    if cj < j {
        path.push((ci, cj + 1));
        for_each_lattice_path(i, j, path, visit);
        path.pop();
    }
}

fn best_lattice_path(grid: &ExpLppGrid, i: usize, j: usize) -> (f64, Vec<(usize, usize)>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_lattice_path(i, j, &mut vec![(0, 0)], &mut |p| {
        let w: f64 = p.iter().map(|&(a, b)| grid.weight(a, b)).sum();
        if w > best.0 {
            best = (w, p.to_vec());
        }
    });
    best
}

/// Maximum path weight from `(0, 0)` to `(i, j)` over every up-right path.
pub fn brute_force_exp_lpp(grid: &ExpLppGrid, i: usize, j: usize) -> f64 {
    best_lattice_path(grid, i, j).0
}

/// Last axis cell on the heaviest path, found by enumeration.
pub fn brute_force_exp_exit(grid: &ExpLppGrid, i: usize, j: usize) -> ExpExitRecord {
    let (_, path) = best_lattice_path(grid, i, j);
    let &(a, b) = path.iter().rev().find(|&&(a, b)| a == 0 || b == 0).expect("path starts on an axis");
    if b == 0 {
        ExpExitRecord { axis: Axis::I, index: a, signed: a as i64 }
    } else {
        ExpExitRecord { axis: Axis::J, index: b, signed: -(b as i64) }
    }
}

/// Whether any particle sits in `(c − r, c + r)` at some time in `[s, u)`,
/// from the piecewise-constant trajectory of every particle id.
pub fn brute_force_openness(h: &ParticleHistory, r: f64, c: f64, s: f64, u: f64) -> bool {
    let init = h.configuration_at(h.bx().t0).expect("initial time is inside the box");
    let mut live: std::collections::HashMap<u32, (f64, f64)> =
        init.ids.iter().zip(&init.positions).map(|(id, p)| (*id, (*p, h.bx().t0))).collect();
    let mut segments = Vec::new();
    for e in h.events() {
        let Some(id) = e.particle else { continue };
        if let Some((p, since)) = live.remove(&id) {
            segments.push((p, since, e.time));
        }
        if let Some(to) = e.to {
            live.insert(id, (to, e.time));
        }
    }
    segments.extend(live.values().map(|(p, since)| (*p, *since, f64::INFINITY)));
    !segments.iter().any(|(p, a, b)| (p - c).abs() < r && *a < u && *b > s)
}

/// Whether some path of open sites from `(start, n_lo)` to the last row
/// with jumps of at most `n_jump` exists, by depth-first enumeration.
pub fn brute_force_survival(g: &SiteGrid, start: i64, n_jump: u64) -> bool {
    fn go(g: &SiteGrid, x: i64, n: i64, j: i64) -> bool {
        let w = g.window();
        if !g.is_open(x, n) {
            return false;
        }
        if n == w.n_hi {
            return true;
        }
        (x - j..=x + j).any(|y| go(g, y, n + 1, j))
    }
    go(g, start, g.window().n_lo, n_jump as i64)
}

/// Crossing search by enumeration of every path, testing each step at the
/// points `τ = i/(2|d|)` (which include every breakpoint of membership in
/// the two rectangles and the exit point).
pub fn brute_force_crossing(g: &SiteGrid, geom: &CrossingGeometry, range: u64) -> bool {
    let ext = geom.extent();
    let rects = geom.rects();
    let (ox, on) = geom.origin;
    let open = |x: i64, n: i64| g.is_open(ox + x, on + n);
    // point (x·q + i·d, n·q + i) / q with q = 2·max(|d|, 1)
    let inside = |px: i64, pt: i64, q: i64| {
        rects.iter().any(|&(xa, xb, ta, tb)| xa * q <= px && px <= xb * q && ta * q <= pt && pt <= tb * q)
    };
    fn go(
        x: i64,
        n: i64,
        range: i64,
        ext: i64,
        m: i64,
        open: &dyn Fn(i64, i64) -> bool,
        inside: &dyn Fn(i64, i64, i64) -> bool,
    ) -> bool {
        if n >= ext {
            return false;
        }
        for y in x - range..=x + range {
            let d = y - x;
            let q = 2 * d.abs().max(1);
            for i in 0..=q {
                let (px, pt) = (x * q + i * d, n * q + i);
                if !inside(px, pt, q) {
                    break;
                }
                if px == ext * q && pt >= m * q && (i < q || open(y, n + 1)) {
                    return true;
                }
                if i == q && open(y, n + 1) && go(y, n + 1, range, ext, m, open, inside) {
                    return true;
                }
            }
        }
        false
    }
    let range = range.min(ext as u64) as i64;
    (0..=geom.l).any(|x| open(x, 0) && go(x, 0, range, ext, geom.big_l, &open, &inside))
}
