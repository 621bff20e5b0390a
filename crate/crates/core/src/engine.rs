//! The query engine: an [`SdIndex`] pins one sketch per canonical set of a
//! range structure, and two indexes built with the same seed and mode answer
//! set-difference queries without touching raw items again. A query range
//! decomposes into signed canonical sets on each side; the matching sketches
//! are combined cellwise, the two combinations subtracted, and the result
//! decoded (exact ids) or estimated (difference size), depending on the mode.

use crate::canonical::{
    AnyStructure, CanonicalStructure, DataItem, Geometry, PrefixGrid, RangeQuery, Sign,
    SignedDecomposition, StructureKind,
};
use crate::error::{Error, Result};
use crate::hashing::{ceil_log2_u64, mix64};
use crate::ibf::params_for;
use crate::sketches::{
    f2_params, strata_m_prime, F2Sketch, LevelPlan, SdrFixed, SdrHier, StrataEstimator, J_MIN,
};
use std::collections::HashMap;

/// What gets attached to every canonical set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SketchMode {
    /// Difference sketches with a fixed decodable capacity `m`.
    FixedM { m: usize, epsilon: f64 },
    /// Ladders of difference sketches searched by doubling at query time.
    Variable { plan: LevelPlan },
    /// Difference-size estimation via second-moment sketches.
    CountF2 { delta: f64, epsilon: f64 },
    /// Difference-size estimation via sampled difference sketches.
    CountStrata {
        m_prime: usize,
        delta: f64,
        epsilon: f64,
        universe: u64,
    },
}

impl SketchMode {
    pub fn fixed(m: usize, epsilon: f64) -> SketchMode {
        SketchMode::FixedM { m, epsilon }
    }

    pub fn variable_for(n: usize, epsilon: f64) -> Result<SketchMode> {
        Ok(SketchMode::Variable {
            plan: LevelPlan::for_dataset(n, epsilon)?,
        })
    }

    pub fn count_f2(delta: f64, epsilon: f64) -> SketchMode {
        SketchMode::CountF2 { delta, epsilon }
    }

    pub fn count_strata(delta: f64, epsilon: f64, universe: u64) -> Result<SketchMode> {
        Ok(SketchMode::CountStrata {
            m_prime: strata_m_prime(delta, epsilon)?,
            delta,
            epsilon,
            universe,
        })
    }

    fn validate(&self, items: &[DataItem], master_seed: u64) -> Result<()> {
        match *self {
            SketchMode::FixedM { m, epsilon } => params_for(master_seed, m, epsilon).map(|_| ()),
            SketchMode::Variable { plan } => {
                plan.check_valid()?;
                let need = (ceil_log2_u64(items.len().max(1) as u64) + 1).max(J_MIN);
                if plan.j_max < need {
                    return Err(Error::InvalidParams(format!(
                        "level plan tops out at 2^{} but {} items need 2^{need}",
                        plan.j_max,
                        items.len()
                    )));
                }
                Ok(())
            }
            SketchMode::CountF2 { delta, epsilon } => f2_params(delta, epsilon).map(|_| ()),
            SketchMode::CountStrata {
                m_prime,
                delta,
                epsilon,
                universe,
            } => {
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(Error::InvalidParams(format!(
                        "delta = {delta} outside (0, 1]"
                    )));
                }
                let _probe = StrataEstimator::empty(m_prime, epsilon, universe, master_seed)?;
                if let Some(big) = items.iter().map(|it| it.id).find(|&id| id >= universe) {
                    return Err(Error::IdTooWide { id: big });
                }
                Ok(())
            }
        }
    }

    pub(crate) fn matches(&self, other: &SketchMode) -> bool {
        match (*self, *other) {
            (
                SketchMode::FixedM { m: m1, epsilon: e1 },
                SketchMode::FixedM { m: m2, epsilon: e2 },
            ) => m1 == m2 && e1.to_bits() == e2.to_bits(),
            (SketchMode::Variable { plan: p1 }, SketchMode::Variable { plan: p2 }) => {
                p1.j_min == p2.j_min
                    && p1.j_max == p2.j_max
                    && p1.epsilon.to_bits() == p2.epsilon.to_bits()
            }
            (
                SketchMode::CountF2 {
                    delta: d1,
                    epsilon: e1,
                },
                SketchMode::CountF2 {
                    delta: d2,
                    epsilon: e2,
                },
            ) => d1.to_bits() == d2.to_bits() && e1.to_bits() == e2.to_bits(),
            (
                SketchMode::CountStrata {
                    m_prime: m1,
                    delta: d1,
                    epsilon: e1,
                    universe: u1,
                },
                SketchMode::CountStrata {
                    m_prime: m2,
                    delta: d2,
                    epsilon: e2,
                    universe: u2,
                },
            ) => {
                m1 == m2 && u1 == u2 && d1.to_bits() == d2.to_bits() && e1.to_bits() == e2.to_bits()
            }
            _ => false,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SketchMode::FixedM { .. } => "fixed",
            SketchMode::Variable { .. } => "variable",
            SketchMode::CountF2 { .. } => "count-f2",
            SketchMode::CountStrata { .. } => "count-strata",
        }
    }
}

impl std::fmt::Display for SketchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SketchMode::FixedM { m, epsilon } => write!(f, "fixed(m={m}, eps={epsilon})"),
            SketchMode::Variable { plan } => {
                write!(
                    f,
                    "variable(2^{}..2^{}, eps={})",
                    plan.j_min, plan.j_max, plan.epsilon
                )
            }
            SketchMode::CountF2 { delta, epsilon } => {
                write!(f, "count-f2(delta={delta}, eps={epsilon})")
            }
            SketchMode::CountStrata {
                m_prime,
                delta,
                epsilon,
                universe,
            } => write!(
                f,
                "count-strata(m'={m_prime}, delta={delta}, eps={epsilon}, universe=2^{})",
                ceil_log2_u64((*universe).max(2))
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetSketch {
    Fixed(SdrFixed),
    Hier(SdrHier),
    F2(F2Sketch),
    Strata(StrataEstimator),
}

/// A structure plus one sketch per canonical set, all derived from one master
/// seed. Indexes only combine with indexes sharing the seed, structure kind,
/// mode, and coordinate scale.
#[derive(Debug, Clone)]
pub struct SdIndex {
    structure: AnyStructure,
    mode: SketchMode,
    master_seed: u64,
    dataset: String,
    coord_scale: f64,
    fingerprint: u64,
    sketches: Vec<SetSketch>,
}

impl SdIndex {
    pub fn build(
        kind: StructureKind,
        items: Vec<DataItem>,
        mode: SketchMode,
        master_seed: u64,
        dataset: impl Into<String>,
    ) -> Result<SdIndex> {
        Self::attach(
            AnyStructure::build(kind, items)?,
            mode,
            master_seed,
            dataset,
        )
    }

    /// Attach per-set sketches to an already-built structure.
    pub fn attach(
        structure: AnyStructure,
        mode: SketchMode,
        master_seed: u64,
        dataset: impl Into<String>,
    ) -> Result<SdIndex> {
        mode.validate(structure.items(), master_seed)?;
        let sketches = build_sketches(&structure, &mode, master_seed)?;
        let fingerprint = fingerprint_items(structure.items());
        Ok(SdIndex {
            structure,
            mode,
            master_seed,
            dataset: dataset.into(),
            coord_scale: 1.0,
            fingerprint,
            sketches,
        })
    }

    pub(crate) fn from_parts(
        structure: AnyStructure,
        mode: SketchMode,
        master_seed: u64,
        dataset: String,
        coord_scale: f64,
        sketches: Vec<SetSketch>,
    ) -> Result<SdIndex> {
        if sketches.len() != structure.set_count() {
            return Err(Error::Corrupt(format!(
                "{} sketches for {} canonical sets",
                sketches.len(),
                structure.set_count()
            )));
        }
        let fingerprint = fingerprint_items(structure.items());
        Ok(SdIndex {
            structure,
            mode,
            master_seed,
            dataset,
            coord_scale,
            fingerprint,
            sketches,
        })
    }

    pub fn structure(&self) -> &AnyStructure {
        &self.structure
    }
    pub fn kind(&self) -> StructureKind {
        self.structure.kind()
    }
    pub fn items(&self) -> &[DataItem] {
        self.structure.items()
    }
    pub fn mode(&self) -> &SketchMode {
        &self.mode
    }
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
    pub fn dataset(&self) -> &str {
        &self.dataset
    }
    /// Content hash of the items (order-independent); equal fingerprints plus
    /// equal ranges short-circuit a query to an empty difference.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    pub fn coord_scale(&self) -> f64 {
        self.coord_scale
    }
    pub fn set_coord_scale(&mut self, scale: f64) {
        self.coord_scale = scale;
    }
    pub(crate) fn sketches(&self) -> &[SetSketch] {
        &self.sketches
    }

    /// Total sketch cells/counters across the index — the dominant share of
    /// the serialized size (each cell is a few machine words).
    pub fn total_sketch_cells(&self) -> u64 {
        self.sketches
            .iter()
            .map(|s| match s {
                SetSketch::Fixed(f) => f.ibf().cells().len() as u64,
                SetSketch::Hier(h) => h
                    .levels()
                    .iter()
                    .map(|l| l.ibf().cells().len() as u64)
                    .sum(),
                SetSketch::F2(f) => f.rows() as u64 * f.buckets() as u64,
                SetSketch::Strata(s) => s.layers().iter().map(|l| l.cells().len() as u64).sum(),
            })
            .sum()
    }

    /// Rebuild every canonical set's sketch directly from its elements and
    /// compare bit for bit with the stored one. Grids attach sketches through
    /// an incremental inclusion-exclusion pass, so this doubles as the check
    /// that the incremental path agrees with direct builds; it also catches a
    /// container whose payload drifted from its items.
    pub fn verify_sketches(&self) -> Result<()> {
        for set in 0..self.structure.set_count() {
            let els = self.structure.set_elements(set)?;
            let ok = match (&self.mode, &self.sketches[set]) {
                (SketchMode::FixedM { m, epsilon }, SetSketch::Fixed(s)) => {
                    *s == SdrFixed::build(els, *m, *epsilon, self.master_seed)?
                }
                (SketchMode::Variable { plan }, SetSketch::Hier(s)) => {
                    *s == SdrHier::build(els, plan, self.master_seed)?
                }
                (SketchMode::CountF2 { delta, epsilon }, SetSketch::F2(s)) => {
                    *s == F2Sketch::build(els, *delta, *epsilon, self.master_seed)?
                }
                (
                    SketchMode::CountStrata {
                        m_prime,
                        epsilon,
                        universe,
                        ..
                    },
                    SetSketch::Strata(s),
                ) => {
                    *s == StrataEstimator::build(
                        els,
                        *m_prime,
                        *epsilon,
                        *universe,
                        self.master_seed,
                    )?
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Corrupt(format!(
                    "sketch for canonical set {set} does not match a direct rebuild"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum SdDiffAnswer {
    /// Exact symmetric difference restricted to the two ranges; ids sorted.
    Diff {
        only_in_a: Vec<u64>,
        only_in_b: Vec<u64>,
        level_used: Option<u32>,
    },
    /// Fixed-capacity decode didn't complete: the difference exceeds m.
    TooLarge,
    /// No ladder level decoded completely.
    DecodeFailed,
}

impl SdDiffAnswer {
    fn empty() -> SdDiffAnswer {
        SdDiffAnswer::Diff {
            only_in_a: Vec::new(),
            only_in_b: Vec::new(),
            level_used: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SdCountAnswer {
    pub estimate: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub method: &'static str,
}

fn check_pair(a: &SdIndex, b: &SdIndex) -> Result<()> {
    if a.master_seed != b.master_seed {
        return Err(Error::SeedMismatch {
            a: a.master_seed,
            b: b.master_seed,
        });
    }
    if a.kind() != b.kind() {
        return Err(Error::ConfigMismatch(format!(
            "structure kinds differ: {} vs {}",
            a.kind(),
            b.kind()
        )));
    }
    if !a.mode.matches(&b.mode) {
        return Err(Error::ModeMismatch(format!("{} vs {}", a.mode, b.mode)));
    }
    if a.coord_scale.to_bits() != b.coord_scale.to_bits() {
        return Err(Error::ModeMismatch(format!(
            "coordinate scales differ: {} vs {}",
            a.coord_scale, b.coord_scale
        )));
    }
    Ok(())
}

/// Exact set-difference query. Fixed mode decodes at capacity m or reports
/// `TooLarge`; variable mode retries up the ladder and reports the first
/// complete level or `DecodeFailed`.
pub fn query_diff(
    a: &SdIndex,
    range_a: &RangeQuery,
    b: &SdIndex,
    range_b: &RangeQuery,
) -> Result<SdDiffAnswer> {
    check_pair(a, b)?;
    if !matches!(
        a.mode,
        SketchMode::FixedM { .. } | SketchMode::Variable { .. }
    ) {
        return Err(Error::ModeMismatch(format!(
            "{} indexes only answer count queries",
            a.mode
        )));
    }
    if a.fingerprint == b.fingerprint && range_a == range_b {
        return Ok(SdDiffAnswer::empty());
    }
    let dec_a = a.structure.decompose(range_a)?;
    let dec_b = b.structure.decompose(range_b)?;
    match a.mode {
        SketchMode::FixedM { .. } => {
            let ca = combined_fixed(a, &dec_a)?;
            let cb = combined_fixed(b, &dec_b)?;
            let rep = ca.report(&cb)?;
            if rep.complete {
                Ok(sorted_diff(rep.positive, rep.negative, None))
            } else {
                Ok(SdDiffAnswer::TooLarge)
            }
        }
        SketchMode::Variable { plan } => {
            for j in plan.j_min..=plan.j_max {
                let ca = combined_level(a, &dec_a, j)?;
                let cb = combined_level(b, &dec_b, j)?;
                let rep = ca.report(&cb)?;
                if rep.complete {
                    return Ok(sorted_diff(rep.positive, rep.negative, Some(j)));
                }
            }
            Ok(SdDiffAnswer::DecodeFailed)
        }
        _ => unreachable!(),
    }
}

/// Estimated difference size between two ranges.
pub fn query_count(
    a: &SdIndex,
    range_a: &RangeQuery,
    b: &SdIndex,
    range_b: &RangeQuery,
) -> Result<SdCountAnswer> {
    check_pair(a, b)?;
    let (delta, epsilon, method) = match a.mode {
        SketchMode::CountF2 { delta, epsilon } => (delta, epsilon, "f2"),
        SketchMode::CountStrata { delta, epsilon, .. } => (delta, epsilon, "strata"),
        _ => {
            return Err(Error::ModeMismatch(format!(
                "{} indexes only answer exact-diff queries",
                a.mode
            )))
        }
    };
    if a.fingerprint == b.fingerprint && range_a == range_b {
        return Ok(SdCountAnswer {
            estimate: 0.0,
            delta,
            epsilon,
            method,
        });
    }
    let dec_a = a.structure.decompose(range_a)?;
    let dec_b = b.structure.decompose(range_b)?;
    let estimate = match a.mode {
        SketchMode::CountF2 { .. } => {
            combined_f2(a, &dec_a)?.hamming_estimate(&combined_f2(b, &dec_b)?)?
        }
        SketchMode::CountStrata { .. } => {
            combined_strata(a, &dec_a)?.estimate(&combined_strata(b, &dec_b)?)?
        }
        _ => unreachable!(),
    };
    Ok(SdCountAnswer {
        estimate,
        delta,
        epsilon,
        method,
    })
}

/// Ground truth by brute force over the raw items.
pub fn naive_diff(
    items_a: &[DataItem],
    range_a: &RangeQuery,
    items_b: &[DataItem],
    range_b: &RangeQuery,
) -> (Vec<u64>, Vec<u64>) {
    use std::collections::HashSet;
    let in_a: HashSet<u64> = crate::canonical::naive_filter(items_a, range_a)
        .into_iter()
        .collect();
    let in_b: HashSet<u64> = crate::canonical::naive_filter(items_b, range_b)
        .into_iter()
        .collect();
    let mut only_a: Vec<u64> = in_a.difference(&in_b).copied().collect();
    let mut only_b: Vec<u64> = in_b.difference(&in_a).copied().collect();
    only_a.sort_unstable();
    only_b.sort_unstable();
    (only_a, only_b)
}

fn sorted_diff(mut pos: Vec<u64>, mut neg: Vec<u64>, level: Option<u32>) -> SdDiffAnswer {
    pos.sort_unstable();
    neg.sort_unstable();
    SdDiffAnswer::Diff {
        only_in_a: pos,
        only_in_b: neg,
        level_used: level,
    }
}

fn combined_fixed(idx: &SdIndex, dec: &SignedDecomposition) -> Result<SdrFixed> {
    let SketchMode::FixedM { m, epsilon } = idx.mode else {
        return Err(Error::ModeMismatch(format!(
            "{} is not a fixed-capacity index",
            idx.mode
        )));
    };
    let mut acc = SdrFixed::empty(m, epsilon, idx.master_seed)?;
    for &(set, sign) in &dec.terms {
        let SetSketch::Fixed(s) = &idx.sketches[set] else {
            return Err(Error::Corrupt(
                "sketch kind out of sync with index mode".into(),
            ));
        };
        match sign {
            Sign::Plus => acc.add_assign(s)?,
            Sign::Minus => acc.sub_assign(s)?,
        }
    }
    Ok(acc)
}

fn combined_level(idx: &SdIndex, dec: &SignedDecomposition, j: u32) -> Result<SdrFixed> {
    let SketchMode::Variable { plan } = idx.mode else {
        return Err(Error::ModeMismatch(format!(
            "{} is not a variable index",
            idx.mode
        )));
    };
    let mut acc = SdrFixed::empty(1usize << j, plan.level_epsilon(), idx.master_seed)?;
    for &(set, sign) in &dec.terms {
        let SetSketch::Hier(h) = &idx.sketches[set] else {
            return Err(Error::Corrupt(
                "sketch kind out of sync with index mode".into(),
            ));
        };
        let level = h.level_or_build(j, idx.structure.set_elements(set)?, idx.master_seed)?;
        match sign {
            Sign::Plus => acc.add_assign(level.as_ref())?,
            Sign::Minus => acc.sub_assign(level.as_ref())?,
        }
    }
    Ok(acc)
}

fn combined_f2(idx: &SdIndex, dec: &SignedDecomposition) -> Result<F2Sketch> {
    let SketchMode::CountF2 { delta, epsilon } = idx.mode else {
        return Err(Error::ModeMismatch(format!(
            "{} is not an f2 index",
            idx.mode
        )));
    };
    let mut acc = F2Sketch::empty(delta, epsilon, idx.master_seed)?;
    for &(set, sign) in &dec.terms {
        let SetSketch::F2(s) = &idx.sketches[set] else {
            return Err(Error::Corrupt(
                "sketch kind out of sync with index mode".into(),
            ));
        };
        match sign {
            Sign::Plus => acc.add_assign(s)?,
            Sign::Minus => acc.sub_assign(s)?,
        }
    }
    Ok(acc)
}

fn combined_strata(idx: &SdIndex, dec: &SignedDecomposition) -> Result<StrataEstimator> {
    let SketchMode::CountStrata {
        m_prime,
        delta: _,
        epsilon,
        universe,
    } = idx.mode
    else {
        return Err(Error::ModeMismatch(format!(
            "{} is not a strata index",
            idx.mode
        )));
    };
    let mut acc = StrataEstimator::empty(m_prime, epsilon, universe, idx.master_seed)?;
    for &(set, sign) in &dec.terms {
        let SetSketch::Strata(s) = &idx.sketches[set] else {
            return Err(Error::Corrupt(
                "sketch kind out of sync with index mode".into(),
            ));
        };
        match sign {
            Sign::Plus => acc.add_assign(s)?,
            Sign::Minus => acc.sub_assign(s)?,
        }
    }
    Ok(acc)
}

/// Minimal linear-sketch surface the incremental grid builder needs.
trait Linear: Clone {
    fn insert_id(&mut self, id: u64) -> Result<()>;
    fn add(&mut self, other: &Self) -> Result<()>;
    fn sub(&mut self, other: &Self) -> Result<()>;
}

impl Linear for SdrFixed {
    fn insert_id(&mut self, id: u64) -> Result<()> {
        self.insert(id);
        Ok(())
    }
    fn add(&mut self, other: &Self) -> Result<()> {
        self.add_assign(other)
    }
    fn sub(&mut self, other: &Self) -> Result<()> {
        self.sub_assign(other)
    }
}

impl Linear for F2Sketch {
    fn insert_id(&mut self, id: u64) -> Result<()> {
        self.update(id, 1);
        Ok(())
    }
    fn add(&mut self, other: &Self) -> Result<()> {
        self.add_assign(other)
    }
    fn sub(&mut self, other: &Self) -> Result<()> {
        self.sub_assign(other)
    }
}

impl Linear for StrataEstimator {
    fn insert_id(&mut self, id: u64) -> Result<()> {
        self.insert(id)
    }
    fn add(&mut self, other: &Self) -> Result<()> {
        self.add_assign(other)
    }
    fn sub(&mut self, other: &Self) -> Result<()> {
        self.sub_assign(other)
    }
}

fn build_sketches(
    structure: &AnyStructure,
    mode: &SketchMode,
    master_seed: u64,
) -> Result<Vec<SetSketch>> {
    let grid = match structure {
        AnyStructure::Grid1d(g) | AnyStructure::Grid2d(g) => Some(g),
        _ => None,
    };
    match *mode {
        SketchMode::FixedM { m, epsilon } => {
            if let Some(g) = grid {
                let sketches = grid_prefix_sketches(g, SdrFixed::empty(m, epsilon, master_seed)?)?;
                return Ok(sketches.into_iter().map(SetSketch::Fixed).collect());
            }
            per_set(structure, |els| {
                Ok(SetSketch::Fixed(SdrFixed::build(
                    els,
                    m,
                    epsilon,
                    master_seed,
                )?))
            })
        }
        SketchMode::Variable { plan } => per_set(structure, |els| {
            Ok(SetSketch::Hier(SdrHier::build(els, &plan, master_seed)?))
        }),
        SketchMode::CountF2 { delta, epsilon } => {
            if let Some(g) = grid {
                let sketches =
                    grid_prefix_sketches(g, F2Sketch::empty(delta, epsilon, master_seed)?)?;
                return Ok(sketches.into_iter().map(SetSketch::F2).collect());
            }
            per_set(structure, |els| {
                Ok(SetSketch::F2(F2Sketch::build(
                    els,
                    delta,
                    epsilon,
                    master_seed,
                )?))
            })
        }
        SketchMode::CountStrata {
            m_prime,
            delta: _,
            epsilon,
            universe,
        } => {
            if let Some(g) = grid {
                let empty = StrataEstimator::empty(m_prime, epsilon, universe, master_seed)?;
                let sketches = grid_prefix_sketches(g, empty)?;
                return Ok(sketches.into_iter().map(SetSketch::Strata).collect());
            }
            per_set(structure, |els| {
                Ok(SetSketch::Strata(StrataEstimator::build(
                    els,
                    m_prime,
                    epsilon,
                    universe,
                    master_seed,
                )?))
            })
        }
    }
}

fn per_set(
    structure: &AnyStructure,
    mut make: impl FnMut(&[u64]) -> Result<SetSketch>,
) -> Result<Vec<SetSketch>> {
    (0..structure.set_count())
        .map(|id| make(structure.set_elements(id)?))
        .collect()
}

/// Prefix sketches by inclusion-exclusion over the already-built neighbors
/// plus the new cell's items: O(sets * sketch size) instead of rebuilding
/// each prefix from scratch. Bit-identical to direct builds by linearity.
fn grid_prefix_sketches<L: Linear>(grid: &PrefixGrid, empty: L) -> Result<Vec<L>> {
    let (rows, cols) = grid.extent();
    let mut cells: HashMap<(u64, u64), Vec<u64>> = HashMap::new();
    for it in grid.items() {
        let key = match it.geom {
            Geometry::Cell1(i) => (i, 0),
            Geometry::Cell2(i, j) => (i, j),
            _ => return Err(Error::GeometryMismatch("non-cell item in a grid".into())),
        };
        cells.entry(key).or_default().push(it.id);
    }
    let mut sketches: Vec<L> = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let mut s = if r > 0 {
                sketches[((r - 1) * cols + c) as usize].clone()
            } else {
                empty.clone()
            };
            if c > 0 {
                s.add(&sketches[(r * cols + c - 1) as usize])?;
                if r > 0 {
                    s.sub(&sketches[((r - 1) * cols + c - 1) as usize])?;
                }
            }
            if let Some(ids) = cells.get(&(r, c)) {
                for &id in ids {
                    s.insert_id(id)?;
                }
            }
            sketches.push(s);
        }
    }
    Ok(sketches)
}

/// Order-independent content hash of a dataset.
fn fingerprint_items(items: &[DataItem]) -> u64 {
    // items arrive in the structure's canonical order, which is already a
    // pure function of the set; chain-mix them
    let mut h = mix64(items.len() as u64 ^ 0x1d5e_77a9_64b1_c3f5);
    for it in items {
        h = mix64(h ^ mix64(it.id));
        let (tag, a, b) = match it.geom {
            Geometry::P1(x) => (1u64, x as u64, 0),
            Geometry::P2(x, y) => (2, x as u64, y as u64),
            Geometry::Seg(lo, hi) => (3, lo as u64, hi as u64),
            Geometry::Cell1(i) => (4, i, 0),
            Geometry::Cell2(i, j) => (5, i, j),
        };
        h = mix64(h ^ tag);
        h = mix64(h ^ a);
        h = mix64(h ^ b);
    }
    h
}
