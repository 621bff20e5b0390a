//! Dissimilarity measures derived from (|A|, |B|, Hamming distance).
//!
//! Everything here is plain algebra on three numbers, so it is written once,
//! generically over the scalar: f64 for estimator outputs, exact rationals in
//! tests that pin the identities (2·∩ + H = |A| + |B|, ∪ = ∩ + H, and
//! α = β = 1 collapsing Tversky to Jaccard).

use num_traits::Num;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityReport<T> {
    pub intersection: T,
    pub union_size: T,
    pub dice: T,
    pub jaccard: T,
    pub tversky: T,
    /// true when a derived one-sided difference came out negative (possible
    /// with estimated, non-integral Hamming inputs) and was clamped to zero
    pub clamped: bool,
}

/// Derive set-overlap measures from the two set sizes and the (possibly
/// estimated) Hamming distance between their indicator vectors:
///
/// * intersection (|A| + |B| - H) / 2, union (|A| + |B| + H) / 2
/// * Dice H / (|A| + |B|), Jaccard 2H / (|A| + |B| + H)
/// * Tversky with the larger one-sided difference weighted by alpha; at
///   alpha = beta = 1 it equals Jaccard.
///
/// Errors on negative inputs or H > |A| + |B|. One-sided differences that
/// come out negative (estimation noise) clamp to zero and set the flag.
pub fn dissimilarities<T>(
    size_a: T,
    size_b: T,
    hamming: T,
    alpha: T,
    beta: T,
) -> Result<DissimilarityReport<T>>
where
    T: Clone + Num + PartialOrd,
{
    let zero = T::zero;
    let two = || T::one() + T::one();

    for (name, v) in [
        ("sizeA", &size_a),
        ("sizeB", &size_b),
        ("hamming", &hamming),
        ("alpha", &alpha),
        ("beta", &beta),
    ] {
        if *v < zero() {
            return Err(Error::InvalidParams(format!("{name} is negative")));
        }
    }
    let total = size_a.clone() + size_b.clone();
    if hamming > total {
        return Err(Error::InvalidParams(
            "hamming distance exceeds |A| + |B|".into(),
        ));
    }

    let intersection = (total.clone() - hamming.clone()) / two();
    let union_size = (total.clone() + hamming.clone()) / two();

    let dice = if total == zero() {
        zero()
    } else {
        hamming.clone() / total.clone()
    };
    let jaccard = if union_size == zero() {
        zero()
    } else {
        (two() * hamming.clone()) / (total.clone() + hamming.clone())
    };

    // one-sided differences |A \ B| and |B \ A|
    let mut clamped = false;
    let mut clamp = |v: T| {
        if v < zero() {
            clamped = true;
            zero()
        } else {
            v
        }
    };
    let a_only = clamp((size_a.clone() - size_b.clone() + hamming.clone()) / two());
    let b_only = clamp((hamming - size_a + size_b) / two());

    // orient so the larger difference takes alpha (the symmetric-role form)
    let (big, small) = if a_only >= b_only {
        (a_only, b_only)
    } else {
        (b_only, a_only)
    };
    let weighted = alpha * big + beta * small;
    let denom = intersection.clone() + weighted.clone();
    let tversky = if denom == zero() {
        zero()
    } else {
        weighted / denom
    };

    Ok(DissimilarityReport {
        intersection,
        union_size,
        dice,
        jaccard,
        tversky,
        clamped,
    })
}
