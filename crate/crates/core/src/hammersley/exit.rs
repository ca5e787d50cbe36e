//! Rightmost exit points of maximal paths.

use serde::{Deserialize, Serialize};

use super::environment::BoxEnvironment;
use crate::error::{out_of_domain, Result};

/// Box-relative exit coordinate `z` of the maximal paths to a query point
/// and the path value there. `z > 0` means the path leaves the bottom edge
/// at `x0 + z`; `z ≤ 0` means it leaves the left edge at `t0 − z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPointRecord {
    pub z: f64,
    pub value: u64,
}

/// Fenwick tree over ranks answering prefix maxima.
struct MaxFenwick {
    tree: Vec<u64>,
}

impl MaxFenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn update(&mut self, i: usize, v: u64) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].max(v);
            i += i & i.wrapping_neg();
        }
    }

    /// Maximum over ranks `0..i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut m = 0;
        while i > 0 {
            m = m.max(self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        m
    }
}

/// For each clock, the longest strictly increasing chain of clocks that
/// starts at it.
fn forward_chain_lengths(clocks: &[(f64, f64)]) -> Vec<u64> {
    let n = clocks.len();
    let mut times: Vec<f64> = clocks.iter().map(|c| c.1).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    // reversed rank so that "later time" is a prefix
    let rank = |t: f64| times.len() - 1 - times.partition_point(|v| *v < t);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| clocks[*b].0.total_cmp(&clocks[*a].0));
    let mut fen = MaxFenwick::new(times.len());
    let mut out = vec![0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && clocks[order[j]].0 == clocks[order[i]].0 {
            j += 1;
        }
        for &k in &order[i..j] {
            out[k] = 1 + fen.prefix(rank(clocks[k].1));
        }
        for &k in &order[i..j] {
            fen.update(rank(clocks[k].1), out[k]);
        }
        i = j;
    }
    out
}

/// Clock coordinates along one axis with suffix maxima of chain length.
struct SuffixBest {
    coord: Vec<f64>,
    best: Vec<u64>,
}

impl SuffixBest {
    fn new(mut pairs: Vec<(f64, u64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coord = pairs.iter().map(|p| p.0).collect();
        let mut best = vec![0; pairs.len() + 1];
        for i in (0..pairs.len()).rev() {
            best[i] = best[i + 1].max(pairs[i].1);
        }
        Self { coord, best }
    }

    /// Longest chain among clocks with coordinate `> v`.
    fn beyond(&self, v: f64) -> u64 {
        self.best[self.coord.partition_point(|c| *c <= v)]
    }
}

/// Exit point of the maximal paths to `(x, t)`, taking the supremum of the
/// maximizing exit coordinates.
pub fn exit_point(env: &BoxEnvironment, x: f64, t: f64) -> Result<ExitPointRecord> {
    exit_point_with(env, x, t, true)
}

pub fn exit_point_with(env: &BoxEnvironment, x: f64, t: f64, use_sinks: bool) -> Result<ExitPointRecord> {
    let bx = env.bx();
    if !bx.contains(x, t) {
        return Err(out_of_domain(format!("({x}, {t}) outside {bx:?}")));
    }
    let clocks: Vec<(f64, f64)> = env
        .clocks()
        .points()
        .iter()
        .copied()
        .filter(|(cx, ct)| *cx <= x && *ct <= t)
        .collect();
    let chain = forward_chain_lengths(&clocks);
    let by_x = SuffixBest::new(clocks.iter().zip(&chain).map(|(c, b)| (c.0, *b)).collect());
    let by_t = SuffixBest::new(clocks.iter().zip(&chain).map(|(c, b)| (c.1, *b)).collect());

    // Bottom edge: leave at absolute position u in (x0, x].
    let sources = env.sources().coords();
    let n_src = sources.partition_point(|s| *s <= x);
    let f_src = |u: f64| sources[..n_src].partition_point(|s| *s <= u) as u64 + by_x.beyond(u);
    let mut bp: Vec<f64> = sources[..n_src].to_vec();
    bp.extend(clocks.iter().map(|c| c.0));
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    // piece k is [bp[k-1], bp[k]) with bp[-1] = x0+, the last piece ends at x
    let mut src_pieces: Vec<(u64, f64)> = Vec::with_capacity(bp.len() + 1);
    if x > bx.x0 {
        let first_end = bp.first().copied().unwrap_or(x);
        src_pieces.push((f_src(bx.x0), first_end));
        for (k, b) in bp.iter().enumerate() {
            let end = bp.get(k + 1).copied().unwrap_or(x);
            src_pieces.push((f_src(*b), end));
        }
    }
    let best_src = src_pieces.iter().map(|p| p.0).max();

    // Left edge: leave at absolute time s in [t0, t].
    let sinks = if use_sinks { env.sinks().coords() } else { &[] };
    let n_snk = sinks.partition_point(|s| *s <= t);
    let f_snk = |s: f64| sinks[..n_snk].partition_point(|v| *v <= s) as u64 + by_t.beyond(s);
    let mut levels: Vec<f64> = vec![bx.t0];
    levels.extend_from_slice(&sinks[..n_snk]);
    levels.extend(clocks.iter().map(|c| c.1));
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let snk_values: Vec<(u64, f64)> = levels.iter().map(|s| (f_snk(*s), *s)).collect();
    let best_snk = snk_values.iter().map(|p| p.0).max().unwrap_or(0);

    let value = best_src.unwrap_or(0).max(best_snk);
    if best_src == Some(value) {
        // supremum: the end of the rightmost maximizing piece
        let end = src_pieces
            .iter()
            .rev()
            .find(|p| p.0 == value)
            .map(|p| p.1)
            .expect("maximum is attained by some piece");
        return Ok(ExitPointRecord { z: end - bx.x0, value });
    }
    let s = snk_values
        .iter()
        .find(|p| p.0 == value)
        .map(|p| p.1)
        .expect("maximum is attained by some level");
    Ok(ExitPointRecord { z: -(s - bx.t0), value })
}
