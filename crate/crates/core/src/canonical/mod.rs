//! Range-search structures with canonical sets.
//!
//! Each structure organizes a static dataset so that any supported query
//! decomposes into a signed list of precomputed "canonical" subsets: +1 terms
//! cover every in-range item exactly once net, -1 terms cancel overshoot (only
//! the prefix grids use them). Sketches get attached per canonical set
//! elsewhere; this module is pure set-system bookkeeping and is exact.
//!
//! Coordinates are integers; callers quantize floats at ingestion. Query
//! ranges are closed. Ties in build orders break by (coordinate, id).

mod dyadic;
mod grid;
mod segtree;
mod tree1;
mod tree2;

pub use grid::PrefixGrid;
pub use segtree::SegTreeIndex;
pub use tree1::RangeTree1d;
pub use tree2::RangeTree2d;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StructureKind {
    Tree1d,
    Tree2d,
    SegTree,
    Grid1d,
    Grid2d,
}

impl StructureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StructureKind::Tree1d => "tree1d",
            StructureKind::Tree2d => "tree2d",
            StructureKind::SegTree => "segtree",
            StructureKind::Grid1d => "grid1d",
            StructureKind::Grid2d => "grid2d",
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tree1d" => StructureKind::Tree1d,
            "tree2d" => StructureKind::Tree2d,
            "segtree" => StructureKind::SegTree,
            "grid1d" => StructureKind::Grid1d,
            "grid2d" => StructureKind::Grid2d,
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown structure kind {other:?}"
                )))
            }
        })
    }
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Geometry {
    /// point on a line
    P1(i64),
    /// point in the plane
    P2(i64, i64),
    /// closed interval
    Seg(i64, i64),
    /// 1D grid cell
    Cell1(u64),
    /// 2D grid cell (i, j)
    Cell2(u64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DataItem {
    pub id: u64,
    pub geom: Geometry,
}

impl DataItem {
    pub fn p1(id: u64, x: i64) -> Self {
        DataItem {
            id,
            geom: Geometry::P1(x),
        }
    }
    pub fn p2(id: u64, x: i64, y: i64) -> Self {
        DataItem {
            id,
            geom: Geometry::P2(x, y),
        }
    }
    pub fn seg(id: u64, lo: i64, hi: i64) -> Self {
        DataItem {
            id,
            geom: Geometry::Seg(lo, hi),
        }
    }
    pub fn cell1(id: u64, i: u64) -> Self {
        DataItem {
            id,
            geom: Geometry::Cell1(i),
        }
    }
    pub fn cell2(id: u64, i: u64, j: u64) -> Self {
        DataItem {
            id,
            geom: Geometry::Cell2(i, j),
        }
    }
}

/// Closed query ranges. An inverted interval is simply empty, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RangeQuery {
    Interval {
        lo: i64,
        hi: i64,
    },
    Rect {
        x_lo: i64,
        x_hi: i64,
        y_lo: i64,
        y_hi: i64,
    },
    Stab {
        x: i64,
    },
    Grid1 {
        lo: u64,
        hi: u64,
    },
    Grid2 {
        i_lo: u64,
        j_lo: u64,
        i_hi: u64,
        j_hi: u64,
    },
}

impl RangeQuery {
    pub fn fits(&self, kind: StructureKind) -> bool {
        matches!(
            (self, kind),
            (RangeQuery::Interval { .. }, StructureKind::Tree1d)
                | (RangeQuery::Rect { .. }, StructureKind::Tree2d)
                | (RangeQuery::Stab { .. }, StructureKind::SegTree)
                | (RangeQuery::Grid1 { .. }, StructureKind::Grid1d)
                | (RangeQuery::Grid2 { .. }, StructureKind::Grid2d)
        )
    }
}

/// Does this item fall in the range? The exact semantics every structure's
/// decomposition must reproduce.
pub fn geom_in_range(geom: &Geometry, q: &RangeQuery) -> bool {
    match (geom, q) {
        (Geometry::P1(x), RangeQuery::Interval { lo, hi }) => lo <= x && x <= hi,
        (
            Geometry::P2(x, y),
            RangeQuery::Rect {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            },
        ) => x_lo <= x && x <= x_hi && y_lo <= y && y <= y_hi,
        (Geometry::Seg(lo, hi), RangeQuery::Stab { x }) => lo <= x && x <= hi,
        (Geometry::Cell1(i), RangeQuery::Grid1 { lo, hi }) => lo <= i && i <= hi,
        (
            Geometry::Cell2(i, j),
            RangeQuery::Grid2 {
                i_lo,
                j_lo,
                i_hi,
                j_hi,
            },
        ) => i_lo <= i && i <= i_hi && j_lo <= j && j <= j_hi,
        _ => false,
    }
}

/// Ids of the items a query selects, by brute force. The ground truth that
/// decompositions and sketch answers are checked against.
pub fn naive_filter(items: &[DataItem], q: &RangeQuery) -> Vec<u64> {
    let mut ids: Vec<u64> = items
        .iter()
        .filter(|it| geom_in_range(&it.geom, q))
        .map(|it| it.id)
        .collect();
    ids.sort_unstable();
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(&self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Signed list of canonical-set ids covering a query: every in-range item has
/// net coverage +1 across the terms, every out-of-range item net 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignedDecomposition {
    pub terms: Vec<(usize, Sign)>,
}

impl SignedDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub trait CanonicalStructure {
    fn kind(&self) -> StructureKind;
    /// Items in the structure's canonical storage order (deterministic for a
    /// given input set).
    fn items(&self) -> &[DataItem];
    fn set_count(&self) -> usize;
    fn set_elements(&self, id: usize) -> Result<&[u64]>;
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition>;
}

#[derive(Debug, Clone)]
pub enum AnyStructure {
    Tree1d(RangeTree1d),
    Tree2d(RangeTree2d),
    SegTree(SegTreeIndex),
    Grid1d(PrefixGrid),
    Grid2d(PrefixGrid),
}

impl AnyStructure {
    pub fn build(kind: StructureKind, items: Vec<DataItem>) -> Result<AnyStructure> {
        check_unique_ids(&items)?;
        Ok(match kind {
            StructureKind::Tree1d => AnyStructure::Tree1d(RangeTree1d::build(items)?),
            StructureKind::Tree2d => AnyStructure::Tree2d(RangeTree2d::build(items)?),
            StructureKind::SegTree => AnyStructure::SegTree(SegTreeIndex::build(items)?),
            StructureKind::Grid1d => AnyStructure::Grid1d(PrefixGrid::build_1d(items)?),
            StructureKind::Grid2d => AnyStructure::Grid2d(PrefixGrid::build_2d(items)?),
        })
    }

    fn inner(&self) -> &dyn CanonicalStructure {
        match self {
            AnyStructure::Tree1d(s) => s,
            AnyStructure::Tree2d(s) => s,
            AnyStructure::SegTree(s) => s,
            AnyStructure::Grid1d(s) => s,
            AnyStructure::Grid2d(s) => s,
        }
    }
}

impl CanonicalStructure for AnyStructure {
    fn kind(&self) -> StructureKind {
        match self {
            AnyStructure::Tree1d(_) => StructureKind::Tree1d,
            AnyStructure::Tree2d(_) => StructureKind::Tree2d,
            AnyStructure::SegTree(_) => StructureKind::SegTree,
            AnyStructure::Grid1d(_) => StructureKind::Grid1d,
            AnyStructure::Grid2d(_) => StructureKind::Grid2d,
        }
    }
    fn items(&self) -> &[DataItem] {
        self.inner().items()
    }
    fn set_count(&self) -> usize {
        self.inner().set_count()
    }
    fn set_elements(&self, id: usize) -> Result<&[u64]> {
        self.inner().set_elements(id)
    }
    fn decompose(&self, q: &RangeQuery) -> Result<SignedDecomposition> {
        if !q.fits(self.kind()) {
            return Err(Error::GeometryMismatch(format!(
                "{:?} against a {} structure",
                q,
                self.kind()
            )));
        }
        self.inner().decompose(q)
    }
}

fn check_unique_ids(items: &[DataItem]) -> Result<()> {
    let mut ids: Vec<u64> = items.iter().map(|it| it.id).collect();
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateId { id: w[0] });
        }
    }
    Ok(())
}

pub(crate) fn expect_geom<T>(
    items: &[DataItem],
    mut pick: impl FnMut(&Geometry) -> Option<T>,
    want: &str,
) -> Result<Vec<(T, u64)>> {
    items
        .iter()
        .map(|it| {
            pick(&it.geom)
                .map(|g| (g, it.id))
                .ok_or_else(|| Error::GeometryMismatch(format!("item {} is not a {want}", it.id)))
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use std::collections::HashMap;

    /// Net coverage per id across the signed terms.
    pub(crate) fn net_coverage(
        s: &impl CanonicalStructure,
        dec: &SignedDecomposition,
    ) -> HashMap<u64, i64> {
        let mut net = HashMap::new();
        for &(set, sign) in &dec.terms {
            for &id in s.set_elements(set).unwrap() {
                *net.entry(id).or_insert(0) += sign.factor();
            }
        }
        net.retain(|_, v| *v != 0);
        net
    }

    /// The decomposition must cover exactly the in-range ids, each with net
    /// coefficient +1, within the term budget.
    pub(crate) fn assert_decomposition_exact(
        s: &impl CanonicalStructure,
        q: &RangeQuery,
        max_terms: usize,
    ) {
        let dec = s.decompose(q).unwrap();
        assert!(
            dec.len() <= max_terms,
            "{} terms > bound {max_terms} for {q:?}",
            dec.len()
        );
        let net = net_coverage(s, &dec);
        let expect = naive_filter(s.items(), q);
        let mut got: Vec<u64> = net.keys().copied().collect();
        got.sort_unstable();
        assert_eq!(got, expect, "coverage support mismatch for {q:?}");
        assert!(net.values().all(|&v| v == 1), "non-unit coverage for {q:?}");
    }
}
