//! Linear sketches attached to canonical sets.
//!
//! Three families: exact-difference sketches over cell tables (fixed capacity,
//! plus a capacity ladder for when the difference size is unknown), a
//! second-moment sketch whose estimate of the squared Euclidean norm equals
//! the Hamming distance for ±1 indicator differences, and a strata estimator
//! that samples geometrically and scales up the first undecodable layer.
//! All of them add and subtract cellwise, so canonical-set sketches combine
//! by signed sums before any decoding happens.

mod dissim;
mod f2;
mod sdr;
mod strata;

pub use dissim::{dissimilarities, DissimilarityReport};
pub use f2::{f2_params, F2Sketch};
pub use sdr::{LevelPlan, SdrFixed, SdrHier, J_MIN};
pub use strata::{strata_m_prime, StrataEstimator};
