//! Prefix grids over dense integer cells. The canonical sets are prefix
//! boxes anchored at the origin; a range decomposes by inclusion-exclusion
//! into at most 2 signed terms (1D) or 4 (2D). Prefixes with an empty side
//! don't exist, so the corresponding terms are simply dropped.
//!
//! Grid extent comes from the data (max occupied cell + 1). Queries reaching
//! past the extent are errors, not empty results.

use super::{
    expect_geom, CanonicalStructure, DataItem, Geometry, RangeQuery, Sign, SignedDecomposition,
    StructureKind,
};
use crate::error::{Error, Result};

/// Prefix-set storage grows with extent, so keep grids to dense domains.
const MAX_1D_EXTENT: u64 = 1 << 20;
const MAX_2D_SETS: u64 = 1 << 18;

#[derive(Debug, Clone)]
enum Storage {
    One {
        len: u64,
        /// ids sorted by (cell, id); prefix p is ids[..counts[p]]
        ids: Vec<u64>,
        counts: Vec<usize>,
    },
    Two {
        rows: u64,
        cols: u64,
        /// set r*cols + c holds the ids in rows 0..=r, cols 0..=c
        sets: Vec<Vec<u64>>,
    },
}

#[derive(Debug, Clone)]
pub struct PrefixGrid {
    /// sorted by (cell, id)
    items: Vec<DataItem>,
    storage: Storage,
}

impl PrefixGrid {
    pub fn build_1d(items: Vec<DataItem>) -> Result<PrefixGrid> {
        let mut keyed = expect_geom(
            &items,
            |g| {
                if let Geometry::Cell1(i) = g {
                    Some(*i)
                } else {
                    None
                }
            },
            "1D grid cell",
        )?;
        keyed.sort_unstable();
        let max_cell = keyed.last().map(|&(i, _)| i);
        if max_cell.is_some_and(|i| i >= MAX_1D_EXTENT) {
            return Err(Error::InvalidParams(format!(
                "grid cell {} exceeds extent cap {MAX_1D_EXTENT}; prefix grids need dense domains",
                max_cell.unwrap()
            )));
        }
        let len = max_cell.map_or(0, |i| i + 1);
        let items: Vec<DataItem> = keyed
            .iter()
            .map(|&(i, id)| DataItem::cell1(id, i))
            .collect();
        let ids: Vec<u64> = keyed.iter().map(|&(_, id)| id).collect();
        let mut counts = Vec::with_capacity(len as usize);
        let mut taken = 0;
        for p in 0..len {
            while taken < keyed.len() && keyed[taken].0 <= p {
                taken += 1;
            }
            counts.push(taken);
        }
        Ok(PrefixGrid {
            items,
            storage: Storage::One { len, ids, counts },
        })
    }

    pub fn build_2d(items: Vec<DataItem>) -> Result<PrefixGrid> {
        let mut keyed = expect_geom(
            &items,
            |g| {
                if let Geometry::Cell2(i, j) = g {
                    Some((*i, *j))
                } else {
                    None
                }
            },
            "2D grid cell",
        )?;
        keyed.sort_unstable();
        let max_i = keyed.iter().map(|&((i, _), _)| i).max();
        let max_j = keyed.iter().map(|&((_, j), _)| j).max();
        if max_i.is_some_and(|i| i >= MAX_2D_SETS) || max_j.is_some_and(|j| j >= MAX_2D_SETS) {
            return Err(Error::InvalidParams(
                "grid cell coordinate exceeds extent cap; prefix grids need dense domains".into(),
            ));
        }
        let rows = max_i.map_or(0, |i| i + 1);
        let cols = max_j.map_or(0, |j| j + 1);
        if rows * cols > MAX_2D_SETS {
            return Err(Error::InvalidParams(format!(
                "grid extent {rows}x{cols} exceeds {MAX_2D_SETS} sets; prefix grids need dense domains"
            )));
        }
        let items: Vec<DataItem> = keyed
            .iter()
            .map(|&((i, j), id)| DataItem::cell2(id, i, j))
            .collect();

        let cols_u = cols as usize;
        let mut sets: Vec<Vec<u64>> = Vec::with_capacity((rows * cols) as usize);
        let mut row_start = 0;
        for r in 0..rows {
            let row_end = keyed.partition_point(|&((i, _), _)| i <= r);
            let row = &keyed[row_start..row_end]; // sorted by (j, id) within the row
            for c in 0..cols {
                let k = row.partition_point(|&((_, j), _)| j <= c);
                let above = if r > 0 {
                    sets[(r - 1) as usize * cols_u + c as usize].clone()
                } else {
                    Vec::new()
                };
                let mut set = above;
                set.extend(row[..k].iter().map(|&(_, id)| id));
                sets.push(set);
            }
            row_start = row_end;
        }
        Ok(PrefixGrid {
            items,
            storage: Storage::Two { rows, cols, sets },
        })
    }

    pub fn extent(&self) -> (u64, u64) {
        match &self.storage {
            Storage::One { len, .. } => (*len, 1),
            Storage::Two { rows, cols, .. } => (*rows, *cols),
        }
    }
}

impl CanonicalStructure for PrefixGrid {
    fn kind(&self) -> StructureKind {
        match self.storage {
            Storage::One { .. } => StructureKind::Grid1d,
            Storage::Two { .. } => StructureKind::Grid2d,
        }
    }
    fn items(&self) -> &[DataItem] {
        &self.items
    }
    fn set_count(&self) -> usize {
        match &self.storage {
            Storage::One { counts, .. } => counts.len(),
            Storage::Two { sets, .. } => sets.len(),
        }
    }
    fn set_elements(&self, id: usize) -> Result<&[u64]> {
        match &self.storage {
            Storage::One { ids, counts, .. } => counts
                .get(id)
                .map(|&c| &ids[..c])
                .ok_or(Error::UnknownSet(id)),
            Storage::Two { sets, .. } => sets
                .get(id)
                .map(|v| v.as_slice())
                .ok_or(Error::UnknownSet(id)),
        }
    }
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition> {
        let mut dec = SignedDecomposition::default();
        match (&self.storage, q) {
            (Storage::One { len, .. }, RangeQuery::Grid1 { lo, hi }) => {
                if lo > hi {
                    return Ok(dec);
                }
                if *hi >= *len {
                    return Err(Error::GridBounds(format!(
                        "cells [{lo}, {hi}] outside grid of {len}"
                    )));
                }
                dec.terms.push((*hi as usize, Sign::Plus));
                if *lo > 0 {
                    dec.terms.push((*lo as usize - 1, Sign::Minus));
                }
            }
            (
                Storage::Two { rows, cols, .. },
                RangeQuery::Grid2 {
                    i_lo,
                    j_lo,
                    i_hi,
                    j_hi,
                },
            ) => {
                if i_lo > i_hi || j_lo > j_hi {
                    return Ok(dec);
                }
                if *i_hi >= *rows || *j_hi >= *cols {
                    return Err(Error::GridBounds(format!(
                        "cells ({i_lo},{j_lo})-({i_hi},{j_hi}) outside grid of {rows}x{cols}"
                    )));
                }
                let set = |r: u64, c: u64| (r * cols + c) as usize;
                dec.terms.push((set(*i_hi, *j_hi), Sign::Plus));
                if *i_lo > 0 {
                    dec.terms.push((set(i_lo - 1, *j_hi), Sign::Minus));
                }
                if *j_lo > 0 {
                    dec.terms.push((set(*i_hi, j_lo - 1), Sign::Minus));
                }
                if *i_lo > 0 && *j_lo > 0 {
                    dec.terms.push((set(i_lo - 1, j_lo - 1), Sign::Plus));
                }
            }
            _ => {
                return Err(Error::GeometryMismatch(format!(
                    "{q:?} on a {} grid",
                    self.kind()
                )))
            }
        }
        Ok(dec)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{assert_decomposition_exact, net_coverage};
    use super::*;

    #[test]
    fn test_1d_prefixes() {
        // cells: 0 -> {10}, 2 -> {11, 12}, 3 -> {13}; extent 4
        let items = vec![
            DataItem::cell1(11, 2),
            DataItem::cell1(10, 0),
            DataItem::cell1(13, 3),
            DataItem::cell1(12, 2),
        ];
        let g = PrefixGrid::build_1d(items).unwrap();
        assert_eq!(g.extent(), (4, 1));
        assert_eq!(g.set_count(), 4);
        assert_eq!(g.set_elements(0).unwrap(), &[10]);
        assert_eq!(g.set_elements(1).unwrap(), &[10]);
        assert_eq!(g.set_elements(3).unwrap(), &[10, 11, 12, 13]);

        for lo in 0..4 {
            for hi in 0..4 {
                assert_decomposition_exact(&g, &RangeQuery::Grid1 { lo, hi }, 2);
            }
        }
        // prefix anchored at 0 uses a single term
        assert_eq!(
            g.decompose(&RangeQuery::Grid1 { lo: 0, hi: 2 })
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            g.decompose(&RangeQuery::Grid1 { lo: 1, hi: 4 }),
            Err(Error::GridBounds(_))
        ));
    }

    #[test]
    fn test_2d_inclusion_exclusion() {
        let mut items = Vec::new();
        let mut id = 0;
        for i in 0..4u64 {
            for j in 0..3u64 {
                if (i + j) % 2 == 0 {
                    items.push(DataItem::cell2(id, i, j));
                    id += 1;
                }
            }
        }
        let g = PrefixGrid::build_2d(items).unwrap();
        assert_eq!(g.extent(), (4, 3));
        assert_eq!(g.set_count(), 12);

        for i_lo in 0..4 {
            for i_hi in i_lo..4 {
                for j_lo in 0..3 {
                    for j_hi in j_lo..3 {
                        let q = RangeQuery::Grid2 {
                            i_lo,
                            j_lo,
                            i_hi,
                            j_hi,
                        };
                        assert_decomposition_exact(&g, &q, 4);
                    }
                }
            }
        }
        // interior rectangle exercises all four signed terms
        let q = RangeQuery::Grid2 {
            i_lo: 1,
            j_lo: 1,
            i_hi: 2,
            j_hi: 2,
        };
        let dec = g.decompose(&q).unwrap();
        assert_eq!(dec.len(), 4);
        let minus = dec.terms.iter().filter(|&&(_, s)| s == Sign::Minus).count();
        assert_eq!(minus, 2);
        // net coverage cancels outside even though sets overlap heavily
        let net = net_coverage(&g, &dec);
        assert!(net.values().all(|&v| v == 1));
    }

    #[test]
    fn test_bounds_and_empty() {
        let g = PrefixGrid::build_2d(vec![DataItem::cell2(1, 1, 1)]).unwrap();
        assert!(matches!(
            g.decompose(&RangeQuery::Grid2 {
                i_lo: 0,
                j_lo: 0,
                i_hi: 2,
                j_hi: 1
            }),
            Err(Error::GridBounds(_))
        ));
        // inverted is empty, not an error
        assert!(g
            .decompose(&RangeQuery::Grid2 {
                i_lo: 1,
                j_lo: 1,
                i_hi: 0,
                j_hi: 1
            })
            .unwrap()
            .is_empty());

        let empty = PrefixGrid::build_1d(vec![]).unwrap();
        assert_eq!(empty.set_count(), 0);
        assert!(matches!(
            empty.decompose(&RangeQuery::Grid1 { lo: 0, hi: 0 }),
            Err(Error::GridBounds(_))
        ));
    }

    #[test]
    fn test_extent_cap() {
        let far = vec![DataItem::cell1(1, 1 << 21)];
        assert!(matches!(
            PrefixGrid::build_1d(far),
            Err(Error::InvalidParams(_))
        ));
        let far2 = vec![DataItem::cell2(1, 1 << 10, 1 << 10)];
        assert!(matches!(
            PrefixGrid::build_2d(far2),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn test_set_order_is_deterministic() {
        let items = vec![
            DataItem::cell2(5, 1, 0),
            DataItem::cell2(3, 0, 1),
            DataItem::cell2(9, 0, 0),
            DataItem::cell2(1, 1, 1),
        ];
        let a = PrefixGrid::build_2d(items.clone()).unwrap();
        let mut shuffled = items;
        shuffled.reverse();
        let b = PrefixGrid::build_2d(shuffled).unwrap();
        assert_eq!(a.items(), b.items());
        for id in 0..a.set_count() {
            assert_eq!(a.set_elements(id).unwrap(), b.set_elements(id).unwrap());
        }
    }
}
