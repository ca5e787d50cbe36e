//! Longest increasing chains by patience sorting.

use std::cmp::Ordering;

use crate::geometry::SpaceTimeBox;
use crate::points::PointSet2D;

/// Sort key `(value, tier, index)` compared lexicographically. Boundary
/// marks share a coordinate (sources all sit at `t0`, sinks at `x0`); the
/// tier and index break those ties so a chain can collect several sources
/// or several sinks in a row but never mix the two.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Key {
    pub v: f64,
    pub tier: u8,
    pub idx: u32,
}

impl Key {
    pub fn plain(v: f64) -> Self {
        Self { v, tier: 1, idx: 0 }
    }

    pub fn cmp(&self, other: &Key) -> Ordering {
        self.v
            .total_cmp(&other.v)
            .then(self.tier.cmp(&other.tier))
            .then(self.idx.cmp(&other.idx))
    }
}

/// Length of the longest chain strictly increasing in both keys. The input
/// must be sorted by x-key ascending, ties by t-key descending.
pub(crate) fn patience<'a>(t_keys: impl Iterator<Item = &'a Key>) -> usize {
    let mut tails: Vec<Key> = Vec::new();
    for k in t_keys {
        let pos = tails.partition_point(|tail| tail.cmp(k) == Ordering::Less);
        if pos == tails.len() {
            tails.push(*k);
        } else {
            tails[pos] = *k;
        }
    }
    tails.len()
}

/// Longest chain strictly increasing in both coordinates among the points
/// inside `(x0, x1] × (t0, t1]`.
pub fn lis_count(points: &PointSet2D, rect: &SpaceTimeBox) -> usize {
    let mut inside: Vec<(f64, f64)> = points
        .points()
        .iter()
        .copied()
        .filter(|(x, t)| rect.x0 < *x && *x <= rect.x1 && rect.t0 < *t && *t <= rect.t1)
        .collect();
    inside.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let keys: Vec<Key> = inside.iter().map(|p| Key::plain(p.1)).collect();
    patience(keys.iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_chain;
    use crate::points::sample_ppp_2d;
    use crate::rng::RandomStream;

    fn unit_box(side: f64) -> SpaceTimeBox {
        SpaceTimeBox::new(0.0, side, 0.0, side).unwrap()
    }

    #[test]
    fn small_cases() {
        let b = unit_box(4.0);
        let empty = PointSet2D::empty(b);
        assert_eq!(lis_count(&empty, &b), 0);
        let chain = PointSet2D::from_points(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], b).unwrap();
        assert_eq!(lis_count(&chain, &b), 3);
        let anti = PointSet2D::from_points(vec![(1.0, 2.0), (2.0, 1.0)], b).unwrap();
        assert_eq!(lis_count(&anti, &b), 1);
        // equal coordinates are not strictly increasing
        let flat = PointSet2D::from_points(vec![(1.0, 1.0), (2.0, 1.0), (2.0, 3.0)], b).unwrap();
        assert_eq!(lis_count(&flat, &b), 2);
        // half-open rectangle
        let r = SpaceTimeBox::new(1.0, 3.0, 1.0, 3.0).unwrap();
        assert_eq!(lis_count(&chain, &r), 2);
    }

    #[test]
    fn matches_subset_enumeration() {
        let b = unit_box(1.0);
        for rep in 0..200 {
            let mut s = RandomStream::for_replicate(17, 0, rep);
            let mut pts = sample_ppp_2d(&mut s, 10.0, b).unwrap().points().to_vec();
            pts.truncate(10);
            let set = PointSet2D::from_points(pts.clone(), b).unwrap();
            assert_eq!(lis_count(&set, &b), brute_force_chain(&pts));
        }
    }
}
