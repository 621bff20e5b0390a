//! Set-difference range queries over sketch-indexed datasets.
//!
//! Given two datasets and one orthogonal range per side, answer questions
//! about the symmetric difference (R1 ∩ X1) △ (R2 ∩ X2) without rescanning
//! the data: report the differing ids exactly when the difference is small,
//! or estimate its size. The machinery is a classical range-search structure
//! (range trees, a segment tree for stabbing, prefix grids) whose canonical
//! sets each carry a small linear sketch; a query combines the sketches of
//! the O(polylog) canonical sets covering each side and decodes or estimates
//! the subtraction.
//!
//! Everything is deterministic given a master seed, and every sketch is
//! linear, so sketches built on different machines from the same seed can be
//! added, subtracted, and compared bit for bit.

pub mod canonical;
pub mod container;
pub mod engine;
pub mod error;
pub mod hashing;
pub mod ibf;
pub mod sketches;
pub mod synth;

pub use error::{Error, Result};

pub use canonical::{
    AnyStructure, CanonicalStructure, DataItem, Geometry, RangeQuery, Sign, SignedDecomposition,
    StructureKind,
};
pub use engine::{
    naive_diff, query_count, query_diff, SdCountAnswer, SdDiffAnswer, SdIndex, SketchMode,
};
pub use ibf::{DecodeResult, Ibf, Membership};

/// Dissimilarity report over plain floats (the production path; estimators
/// hand in non-integral Hamming values).
pub type DissimilarityReportF64 = sketches::DissimilarityReport<f64>;
