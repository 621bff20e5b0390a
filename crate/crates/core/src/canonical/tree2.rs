//! 2D range tree: an x-tree over points sorted by x, where every x-node keeps
//! its points re-sorted by y under a secondary y-tree. The canonical sets are
//! the y-nodes of all x-nodes. A rectangle decomposes into the y-covers inside
//! the x-cover: all +1, at most 4*ceil(log2 n)^2 terms.

use super::dyadic::DyadicTree;
use super::{
    expect_geom, CanonicalStructure, DataItem, Geometry, RangeQuery, Sign, SignedDecomposition,
    StructureKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct YLevel {
    /// sorted by (y, id)
    keys: Vec<i64>,
    ids: Vec<u64>,
    tree: DyadicTree,
    /// global id of this x-node's first y-node
    set_base: usize,
}

#[derive(Debug, Clone)]
pub struct RangeTree2d {
    /// sorted by (x, y, id)
    items: Vec<DataItem>,
    x_keys: Vec<i64>,
    x_tree: DyadicTree,
    levels: Vec<YLevel>,
    /// set_base per x-node plus a final total, for set-id lookup
    bases: Vec<usize>,
    total_sets: usize,
}

impl RangeTree2d {
    pub fn build(items: Vec<DataItem>) -> Result<RangeTree2d> {
        let mut keyed = expect_geom(
            &items,
            |g| {
                if let Geometry::P2(x, y) = g {
                    Some((*x, *y))
                } else {
                    None
                }
            },
            "2D point",
        )?;
        keyed.sort_unstable();
        let x_keys: Vec<i64> = keyed.iter().map(|&((x, _), _)| x).collect();
        let items: Vec<DataItem> = keyed
            .iter()
            .map(|&((x, y), id)| DataItem::p2(id, x, y))
            .collect();
        let x_tree = DyadicTree::over(items.len());

        // y-sorted (y, id) list per x-node, built children-first (children
        // follow their parent in preorder, so reverse index order works).
        let node_count = x_tree.node_count();
        let mut sorted: Vec<Vec<(i64, u64)>> = vec![Vec::new(); node_count];
        for v in (0..node_count).rev() {
            let (lo, hi) = x_tree.range(v);
            if hi - lo == 1 {
                let ((_, y), id) = keyed[lo];
                sorted[v] = vec![(y, id)];
            } else {
                // children of v: left is v+1; right starts after left's subtree
                let left = v + 1;
                let (_, left_hi) = x_tree.range(left);
                let right = left + 2 * (left_hi - lo) - 1;
                let merged = merge_by_key(&sorted[left], &sorted[right]);
                sorted[v] = merged;
            }
        }

        let mut levels = Vec::with_capacity(node_count);
        let mut bases = Vec::with_capacity(node_count + 1);
        let mut next = 0usize;
        for list in sorted {
            bases.push(next);
            let tree = DyadicTree::over(list.len());
            let set_base = next;
            next += tree.node_count();
            levels.push(YLevel {
                keys: list.iter().map(|&(y, _)| y).collect(),
                ids: list.iter().map(|&(_, id)| id).collect(),
                tree,
                set_base,
            });
        }
        bases.push(next);
        Ok(RangeTree2d {
            items,
            x_keys,
            x_tree,
            levels,
            bases,
            total_sets: next,
        })
    }
}

fn merge_by_key(a: &[(i64, u64)], b: &[(i64, u64)]) -> Vec<(i64, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl CanonicalStructure for RangeTree2d {
    fn kind(&self) -> StructureKind {
        StructureKind::Tree2d
    }
    fn items(&self) -> &[DataItem] {
        &self.items
    }
    fn set_count(&self) -> usize {
        self.total_sets
    }
    fn set_elements(&self, id: usize) -> Result<&[u64]> {
        if id >= self.total_sets {
            return Err(Error::UnknownSet(id));
        }
        let v = self.bases.partition_point(|&b| b <= id) - 1;
        let level = &self.levels[v];
        let (lo, hi) = level.tree.range(id - level.set_base);
        Ok(&level.ids[lo..hi])
    }
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition> {
        let RangeQuery::Rect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        } = *q
        else {
            return Err(Error::GeometryMismatch(format!("{q:?} on a 2D range tree")));
        };
        let mut dec = SignedDecomposition::default();
        if x_lo > x_hi || y_lo > y_hi || self.items.is_empty() {
            return Ok(dec);
        }
        let from = self.x_keys.partition_point(|&x| x < x_lo);
        let to = self.x_keys.partition_point(|&x| x <= x_hi);
        for v in self.x_tree.cover(from, to) {
            let level = &self.levels[v];
            let y_from = level.keys.partition_point(|&y| y < y_lo);
            let y_to = level.keys.partition_point(|&y| y <= y_hi);
            for w in level.tree.cover(y_from, y_to) {
                dec.terms.push((level.set_base + w, Sign::Plus));
            }
        }
        Ok(dec)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::assert_decomposition_exact;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn term_bound(n: usize) -> usize {
        let lg = crate::hashing::ceil_log2_u64(n.max(2) as u64) as usize;
        (4 * lg * lg).max(1)
    }

    #[test]
    fn test_set_count_and_root_sets() {
        // 4 points: x-tree has 7 nodes, each with 2s-1 y-nodes over s points
        let items = vec![
            DataItem::p2(1, 0, 3),
            DataItem::p2(2, 1, 2),
            DataItem::p2(3, 2, 1),
            DataItem::p2(4, 3, 0),
        ];
        let s = RangeTree2d::build(items).unwrap();
        // root: 7 y-nodes; two mid nodes: 3 each; four leaves: 1 each
        assert_eq!(s.set_count(), 7 + 3 + 3 + 1 + 1 + 1 + 1);
        // root's y-root holds all ids
        assert_eq!(s.set_elements(0).unwrap().len(), 4);
        assert!(matches!(s.set_elements(17), Err(Error::UnknownSet(17))));
    }

    #[test]
    fn test_small_rect_queries() {
        let items = vec![
            DataItem::p2(1, 0, 0),
            DataItem::p2(2, 0, 5),
            DataItem::p2(3, 2, 2),
            DataItem::p2(4, 5, 5),
            DataItem::p2(5, 5, 0),
            DataItem::p2(6, 3, 3),
            DataItem::p2(7, -1, -1),
        ];
        let s = RangeTree2d::build(items).unwrap();
        let bound = term_bound(7);
        for (x_lo, x_hi, y_lo, y_hi) in [
            (0, 5, 0, 5),
            (-10, 10, -10, 10),
            (2, 3, 2, 3),
            (0, 0, 0, 0),
            (4, 1, 0, 5), // inverted x
            (6, 9, 6, 9), // misses everything
        ] {
            assert_decomposition_exact(
                &s,
                &RangeQuery::Rect {
                    x_lo,
                    x_hi,
                    y_lo,
                    y_hi,
                },
                bound,
            );
        }
    }

    #[test]
    fn test_duplicate_points_and_empty() {
        let s = RangeTree2d::build(vec![]).unwrap();
        assert_eq!(s.set_count(), 0);
        assert!(s
            .decompose(&RangeQuery::Rect {
                x_lo: 0,
                x_hi: 1,
                y_lo: 0,
                y_hi: 1
            })
            .unwrap()
            .is_empty());

        let items: Vec<DataItem> = (0..6).map(|i| DataItem::p2(i, 1, 1)).collect();
        let s = RangeTree2d::build(items).unwrap();
        assert_decomposition_exact(
            &s,
            &RangeQuery::Rect {
                x_lo: 1,
                x_hi: 1,
                y_lo: 1,
                y_hi: 1,
            },
            term_bound(6),
        );
    }

    #[test]
    fn test_random_queries_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x2d2d);
        for _ in 0..20 {
            let n = rng.gen_range(1..=120);
            let items: Vec<DataItem> = (0..n)
                .map(|i| DataItem::p2(i as u64, rng.gen_range(-20..20), rng.gen_range(-20..20)))
                .collect();
            let s = RangeTree2d::build(items).unwrap();
            for _ in 0..15 {
                let (a, b) = (rng.gen_range(-25..25), rng.gen_range(-25..25));
                let (c, d) = (rng.gen_range(-25..25), rng.gen_range(-25..25));
                let q = RangeQuery::Rect {
                    x_lo: a.min(b),
                    x_hi: a.max(b),
                    y_lo: c.min(d),
                    y_hi: c.max(d),
                };
                assert_decomposition_exact(&s, &q, term_bound(n));
            }
        }
    }
}
