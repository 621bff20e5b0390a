//! Segment tree over closed integer intervals. The line is cut into
//! elementary leaves — a point leaf per distinct endpoint plus a gap leaf for
//! each nonempty stretch between consecutive endpoints — and every segment is
//! stored at the canonical cover of its leaf span. A stab at x selects the
//! sets on the root-to-leaf path of the leaf containing x: all +1, at most
//! ceil(log2 L) + 1 terms for L elementary leaves.

use super::dyadic::DyadicTree;
use super::{
    expect_geom, CanonicalStructure, DataItem, Geometry, RangeQuery, Sign, SignedDecomposition,
    StructureKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SegTreeIndex {
    /// sorted by (lo, hi, id)
    items: Vec<DataItem>,
    /// elementary intervals [lo, hi], closed, in increasing order
    leaves: Vec<(i64, i64)>,
    tree: DyadicTree,
    /// ids stored at each node
    sets: Vec<Vec<u64>>,
}

impl SegTreeIndex {
    pub fn build(items: Vec<DataItem>) -> Result<SegTreeIndex> {
        let mut keyed = expect_geom(
            &items,
            |g| {
                if let Geometry::Seg(lo, hi) = g {
                    Some((*lo, *hi))
                } else {
                    None
                }
            },
            "segment",
        )?;
        for &((lo, hi), id) in &keyed {
            if lo > hi {
                return Err(Error::Data(format!("segment {id} has lo {lo} > hi {hi}")));
            }
        }
        keyed.sort_unstable();
        let items: Vec<DataItem> = keyed
            .iter()
            .map(|&((lo, hi), id)| DataItem::seg(id, lo, hi))
            .collect();

        let mut endpoints: Vec<i64> = keyed.iter().flat_map(|&((lo, hi), _)| [lo, hi]).collect();
        endpoints.sort_unstable();
        endpoints.dedup();

        let mut leaves = Vec::with_capacity(2 * endpoints.len());
        for (i, &e) in endpoints.iter().enumerate() {
            leaves.push((e, e));
            if let Some(&next) = endpoints.get(i + 1) {
                if next > e + 1 {
                    leaves.push((e + 1, next - 1));
                }
            }
        }

        let tree = DyadicTree::over(leaves.len());
        let mut sets = vec![Vec::new(); tree.node_count()];
        for &((lo, hi), id) in &keyed {
            let from = leaves.partition_point(|&(l, _)| l < lo);
            let to = leaves.partition_point(|&(l, _)| l <= hi);
            for node in tree.cover(from, to) {
                sets[node].push(id);
            }
        }
        Ok(SegTreeIndex {
            items,
            leaves,
            tree,
            sets,
        })
    }

    pub fn elementary_count(&self) -> usize {
        self.leaves.len()
    }

    fn leaf_containing(&self, x: i64) -> Option<usize> {
        let pos = self.leaves.partition_point(|&(lo, _)| lo <= x);
        if pos == 0 {
            return None;
        }
        let (lo, hi) = self.leaves[pos - 1];
        (lo <= x && x <= hi).then_some(pos - 1)
    }
}

impl CanonicalStructure for SegTreeIndex {
    fn kind(&self) -> StructureKind {
        StructureKind::SegTree
    }
    fn items(&self) -> &[DataItem] {
        &self.items
    }
    fn set_count(&self) -> usize {
        self.sets.len()
    }
    fn set_elements(&self, id: usize) -> Result<&[u64]> {
        self.sets
            .get(id)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownSet(id))
    }
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition> {
        let RangeQuery::Stab { x } = *q else {
            return Err(Error::GeometryMismatch(format!("{q:?} on a segment tree")));
        };
        let mut dec = SignedDecomposition::default();
        let Some(leaf) = self.leaf_containing(x) else {
            return Ok(dec);
        };
        dec.terms = self
            .tree
            .path(leaf)
            .into_iter()
            .filter(|&n| !self.sets[n].is_empty())
            .map(|n| (n, Sign::Plus))
            .collect();
        Ok(dec)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::assert_decomposition_exact;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn segs(list: &[(i64, i64)]) -> Vec<DataItem> {
        list.iter()
            .enumerate()
            .map(|(i, &(lo, hi))| DataItem::seg(i as u64, lo, hi))
            .collect()
    }

    fn stab_bound(s: &SegTreeIndex) -> usize {
        let leaves = s.elementary_count().max(2) as u64;
        crate::hashing::ceil_log2_u64(leaves) as usize + 1
    }

    #[test]
    fn test_elementary_intervals() {
        // endpoints 1,4,5,9: points + gaps [2,3] and [6,8]; 4 and 5 adjacent
        let s = SegTreeIndex::build(segs(&[(1, 5), (4, 9)])).unwrap();
        assert_eq!(
            s.leaves,
            vec![(1, 1), (2, 3), (4, 4), (5, 5), (6, 8), (9, 9)]
        );
        assert_eq!(s.set_count(), 11);
    }

    #[test]
    fn test_stab_queries() {
        let s = SegTreeIndex::build(segs(&[(1, 5), (4, 9), (4, 4), (-3, -1), (20, 30)])).unwrap();
        let bound = stab_bound(&s);
        for x in [-4, -3, -2, 0, 1, 3, 4, 5, 7, 9, 10, 19, 25, 30, 31] {
            assert_decomposition_exact(&s, &RangeQuery::Stab { x }, bound);
        }
    }

    #[test]
    fn test_segment_count_per_node_bounded() {
        // a segment lands in at most 2*ceil(log2 L) canonical nodes
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e6);
        let items: Vec<DataItem> = (0..100)
            .map(|i| {
                let a = rng.gen_range(-500..500);
                let b = rng.gen_range(-500..500);
                DataItem::seg(i, a.min(b), a.max(b))
            })
            .collect();
        let s = SegTreeIndex::build(items).unwrap();
        let per_seg_bound = 2 * crate::hashing::ceil_log2_u64(s.elementary_count() as u64) as usize;
        let mut uses = std::collections::HashMap::new();
        for set in &s.sets {
            for &id in set {
                *uses.entry(id).or_insert(0usize) += 1;
            }
        }
        assert_eq!(uses.len(), 100);
        assert!(uses.values().all(|&c| c <= per_seg_bound));
    }

    #[test]
    fn test_malformed_and_empty() {
        assert!(matches!(
            SegTreeIndex::build(vec![DataItem::seg(1, 5, 2)]),
            Err(Error::Data(_))
        ));
        let s = SegTreeIndex::build(vec![]).unwrap();
        assert_eq!(s.set_count(), 0);
        assert!(s.decompose(&RangeQuery::Stab { x: 3 }).unwrap().is_empty());
    }

    #[test]
    fn test_zero_length_and_nested_segments() {
        let s = SegTreeIndex::build(segs(&[(5, 5), (0, 10), (4, 6), (5, 5)])).unwrap();
        for x in 0..=11 {
            assert_decomposition_exact(&s, &RangeQuery::Stab { x }, stab_bound(&s));
        }
    }

    #[test]
    fn test_random_stabs_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xabba);
        for _ in 0..30 {
            let n = rng.gen_range(1..=150);
            let items: Vec<DataItem> = (0..n)
                .map(|i| {
                    let a = rng.gen_range(-40..40);
                    let len = rng.gen_range(0..30);
                    DataItem::seg(i as u64, a, a + len)
                })
                .collect();
            let s = SegTreeIndex::build(items).unwrap();
            let bound = stab_bound(&s);
            for x in -45..=75 {
                assert_decomposition_exact(&s, &RangeQuery::Stab { x }, bound);
            }
        }
    }
}
