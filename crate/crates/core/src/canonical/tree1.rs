//! 1D range tree: points sorted by coordinate at the leaves, one canonical
//! set per tree node (the ids under it). An interval query selects a
//! contiguous run of leaves, so its decomposition is the canonical cover of
//! that run — all +1, at most 2*ceil(log2 n) terms.

use super::dyadic::DyadicTree;
use super::{
    expect_geom, CanonicalStructure, DataItem, Geometry, RangeQuery, Sign, SignedDecomposition,
    StructureKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RangeTree1d {
    /// sorted by (x, id)
    items: Vec<DataItem>,
    keys: Vec<i64>,
    ids: Vec<u64>,
    tree: DyadicTree,
}

impl RangeTree1d {
    pub fn build(items: Vec<DataItem>) -> Result<RangeTree1d> {
        let mut keyed = expect_geom(
            &items,
            |g| {
                if let Geometry::P1(x) = g {
                    Some(*x)
                } else {
                    None
                }
            },
            "1D point",
        )?;
        keyed.sort_unstable();
        let keys: Vec<i64> = keyed.iter().map(|&(x, _)| x).collect();
        let ids: Vec<u64> = keyed.iter().map(|&(_, id)| id).collect();
        let items: Vec<DataItem> = keyed.iter().map(|&(x, id)| DataItem::p1(id, x)).collect();
        let tree = DyadicTree::over(items.len());
        Ok(RangeTree1d {
            items,
            keys,
            ids,
            tree,
        })
    }

    /// Positions of the leaves with coordinate in [lo, hi].
    fn leaf_span(&self, lo: i64, hi: i64) -> (usize, usize) {
        let from = self.keys.partition_point(|&x| x < lo);
        let to = self.keys.partition_point(|&x| x <= hi);
        (from, to)
    }
}

impl CanonicalStructure for RangeTree1d {
    fn kind(&self) -> StructureKind {
        StructureKind::Tree1d
    }
    fn items(&self) -> &[DataItem] {
        &self.items
    }
    fn set_count(&self) -> usize {
        self.tree.node_count()
    }
    fn set_elements(&self, id: usize) -> Result<&[u64]> {
        if id >= self.tree.node_count() {
            return Err(Error::UnknownSet(id));
        }
        let (lo, hi) = self.tree.range(id);
        Ok(&self.ids[lo..hi])
    }
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition> {
        let RangeQuery::Interval { lo, hi } = *q else {
            return Err(Error::GeometryMismatch(format!("{q:?} on a 1D range tree")));
        };
        let mut dec = SignedDecomposition::default();
        if lo > hi || self.items.is_empty() {
            return Ok(dec);
        }
        let (from, to) = self.leaf_span(lo, hi);
        dec.terms = self
            .tree
            .cover(from, to)
            .into_iter()
            .map(|n| (n, Sign::Plus))
            .collect();
        Ok(dec)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::assert_decomposition_exact;
    use super::super::AnyStructure;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(xs: &[i64]) -> Vec<DataItem> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| DataItem::p1(100 + i as u64, x))
            .collect()
    }

    #[test]
    fn test_small_interval_queries() {
        let s = RangeTree1d::build(points(&[5, 1, 9, 3, 7, 7, -2, 0])).unwrap();
        assert_eq!(s.set_count(), 15);
        // root holds everything
        assert_eq!(s.set_elements(0).unwrap().len(), 8);
        for (lo, hi) in [(0, 7), (-10, 10), (7, 7), (8, 6), (-5, -3), (1, 9)] {
            assert_decomposition_exact(&s, &RangeQuery::Interval { lo, hi }, 6);
        }
    }

    #[test]
    fn test_duplicate_coordinates_split_by_id() {
        // all at the same x: a query hitting x selects all of them
        let items: Vec<DataItem> = (0..5).map(|i| DataItem::p1(i, 42)).collect();
        let s = RangeTree1d::build(items).unwrap();
        let dec = s
            .decompose(&RangeQuery::Interval { lo: 42, hi: 42 })
            .unwrap();
        assert_eq!(dec.terms, vec![(0, Sign::Plus)]);
        assert_decomposition_exact(&s, &RangeQuery::Interval { lo: 42, hi: 42 }, 1);
    }

    #[test]
    fn test_empty_and_degenerate() {
        let s = RangeTree1d::build(vec![]).unwrap();
        assert_eq!(s.set_count(), 0);
        assert!(s
            .decompose(&RangeQuery::Interval { lo: 0, hi: 10 })
            .unwrap()
            .is_empty());

        let s = RangeTree1d::build(points(&[4])).unwrap();
        assert_eq!(s.set_count(), 1);
        assert_decomposition_exact(&s, &RangeQuery::Interval { lo: 0, hi: 10 }, 1);
        assert_decomposition_exact(&s, &RangeQuery::Interval { lo: 5, hi: 10 }, 1);
    }

    #[test]
    fn test_unknown_set_id() {
        let s = RangeTree1d::build(points(&[1, 2, 3])).unwrap();
        assert!(matches!(s.set_elements(5), Err(Error::UnknownSet(5))));
    }

    #[test]
    fn test_random_queries_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7ee1);
        for trial in 0..40 {
            let n = rng.gen_range(1..=200);
            let items: Vec<DataItem> = (0..n)
                .map(|i| DataItem::p1(i as u64, rng.gen_range(-50..50)))
                .collect();
            let s = AnyStructure::build(StructureKind::Tree1d, items).unwrap();
            let bound = 2 * crate::hashing::ceil_log2_u64(n.max(2) as u64) as usize;
            for _ in 0..20 {
                let a = rng.gen_range(-60..60);
                let b = rng.gen_range(-60..60);
                let q = RangeQuery::Interval {
                    lo: a.min(b),
                    hi: a.max(b),
                };
                assert_decomposition_exact(&s, &q, bound.max(1));
            }
            let _ = trial;
        }
    }
}
