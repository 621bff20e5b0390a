//! Seeded hash families shared by every sketch in the crate.
//!
//! All families are derived from one master seed through fixed domain-separation
//! tags, so two machines given the same seed produce bit-identical sketches and
//! a serialized index decodes anywhere. Four families live here:
//!
//! * cell placement: k distinct table cells per key, one per equal subtable
//! * cell checksums: nonzero lambda-bit check values
//! * sampling levels for strata estimators (geometric distribution)
//! * bucket/sign pairs for second-moment sketches
//!
//! The mixer is the 64-bit finalizer used by splitmix-style generators, applied
//! twice with the salt folded in between; that is plenty for the avalanche
//! quality the decoders assume, and it is trivially portable.

use crate::error::{Error, Result};

pub const TAG_CELL_INDEX: u64 = u64::from_le_bytes(*b"cell-idx");
pub const TAG_CHECKSUM: u64 = u64::from_le_bytes(*b"checksum");
pub const TAG_STRATA_LAYER: u64 = u64::from_le_bytes(*b"stratlyr");
pub const TAG_F2_BUCKET: u64 = u64::from_le_bytes(*b"f2bucket");
pub const TAG_F2_SIGN: u64 = u64::from_le_bytes(*b"f2sig\0\0\0");

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Salt for one function of one family. Functions within a family are told
/// apart by `index` (subtable number, sketch row, ...).
#[inline]
pub fn family_salt(master_seed: u64, tag: u64, index: u32) -> u64 {
    mix64(master_seed ^ tag).wrapping_add((index as u64 + 1).wrapping_mul(GOLDEN))
}

#[inline]
pub fn keyed(salt: u64, x: u64) -> u64 {
    mix64(mix64(x ^ salt).wrapping_add(salt))
}

pub(crate) fn ceil_log2_u64(n: u64) -> u32 {
    debug_assert!(n > 0);
    64 - (n - 1).leading_zeros()
}

/// Parameters of one cell table: `k` subtables of `table_size / k` cells each,
/// with `lambda`-bit checksums. `lambda` must cover `k + ceil(log2 k)` bits
/// (capped at the 64 the field can hold) or singleton validation becomes too
/// weak for the decode guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashConfig {
    pub master_seed: u64,
    pub k: u32,
    pub table_size: usize,
    pub lambda: u32,
}

impl HashConfig {
    pub fn new(master_seed: u64, k: u32, table_size: usize, lambda: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!(
                "k = {k}, need at least 2 hashes"
            )));
        }
        if table_size == 0 || !table_size.is_multiple_of(k as usize) {
            return Err(Error::InvalidParams(format!(
                "table size {table_size} is not a positive multiple of k = {k}"
            )));
        }
        let floor = (k + ceil_log2_u64(k as u64)).min(64);
        if lambda < floor || lambda > 64 {
            return Err(Error::InvalidParams(format!(
                "lambda = {lambda} outside [{floor}, 64] for k = {k}"
            )));
        }
        Ok(HashConfig {
            master_seed,
            k,
            table_size,
            lambda,
        })
    }

    #[inline]
    pub fn subtable_len(&self) -> usize {
        self.table_size / self.k as usize
    }

    /// Cell of subtable `i` that `x` maps to (an index into the whole table).
    #[inline]
    pub fn cell_index(&self, i: u32, x: u64) -> usize {
        let s = self.subtable_len();
        let h = keyed(family_salt(self.master_seed, TAG_CELL_INDEX, i), x);
        i as usize * s + (h % s as u64) as usize
    }

    /// All k cells of `x`, in subtable order. Distinct by construction: one
    /// cell per subtable.
    pub fn cell_indices(&self, x: u64) -> Vec<usize> {
        (0..self.k).map(|i| self.cell_index(i, x)).collect()
    }

    /// Checksum of `x` in [1, 2^lambda). Zero is reserved so an empty cell can
    /// never validate as a singleton.
    #[inline]
    pub fn checksum(&self, x: u64) -> u64 {
        let h = keyed(family_salt(self.master_seed, TAG_CHECKSUM, 0), x);
        let modulus = if self.lambda == 64 {
            u64::MAX
        } else {
            (1u64 << self.lambda) - 1
        };
        h % modulus + 1
    }

    /// Mask for comparing checksum accumulators; sums are compared modulo
    /// 2^lambda.
    #[inline]
    pub fn checksum_mask(&self) -> u64 {
        if self.lambda == 64 {
            u64::MAX
        } else {
            (1u64 << self.lambda) - 1
        }
    }
}

/// Sampling level of `x`: trailing zeros of a keyed hash, so level l is hit
/// with probability 2^-(l+1). A hash of zero (64 trailing zeros) and anything
/// past the last layer clamp to `layer_count - 1`.
#[inline]
pub fn strata_layer(x: u64, master_seed: u64, layer_count: u32) -> u32 {
    debug_assert!(layer_count > 0);
    let h = keyed(family_salt(master_seed, TAG_STRATA_LAYER, 0), x);
    h.trailing_zeros().min(layer_count - 1)
}

/// Bucket and ±1 sign of `x` for one sketch row.
#[inline]
pub fn f2_hashes(x: u64, row: u32, master_seed: u64, bucket_count: usize) -> (usize, i64) {
    debug_assert!(bucket_count > 0);
    let b = keyed(family_salt(master_seed, TAG_F2_BUCKET, row), x) % bucket_count as u64;
    let s = keyed(family_salt(master_seed, TAG_F2_SIGN, row), x) & 1;
    (b as usize, if s == 0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_determinism_across_instances() {
        let a = HashConfig::new(7, 4, 1024, 16).unwrap();
        let b = HashConfig::new(7, 4, 1024, 16).unwrap();
        for x in [0u64, 1, 42, u64::MAX, 1 << 47] {
            assert_eq!(a.cell_indices(x), b.cell_indices(x));
            assert_eq!(a.checksum(x), b.checksum(x));
            assert_eq!(strata_layer(x, 7, 32), strata_layer(x, 7, 32));
            assert_eq!(f2_hashes(x, 3, 7, 64), f2_hashes(x, 3, 7, 64));
        }
    }

    #[test]
    fn test_seed_changes_streams() {
        let a = HashConfig::new(1, 4, 1024, 16).unwrap();
        let b = HashConfig::new(2, 4, 1024, 16).unwrap();
        let differs = (0u64..64).any(|x| a.cell_indices(x) != b.cell_indices(x));
        assert!(differs);
    }

    #[test]
    fn test_cells_one_per_subtable() {
        let cfg = HashConfig::new(99, 4, 1024, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: u64 = rng.gen();
            let idx = cfg.cell_indices(x);
            assert_eq!(idx.len(), 4);
            for (i, &c) in idx.iter().enumerate() {
                assert!(
                    c >= i * 256 && c < (i + 1) * 256,
                    "cell {c} outside subtable {i}"
                );
            }
        }
    }

    // Chi-square against the uniform multinomial, per subtable. For 256 bins
    // the statistic has mean 255 and sd sqrt(510) ~ 22.6 under uniformity;
    // 5 sigma keeps the test deterministic-in-practice without being blind.
    #[test]
    fn test_cell_index_uniformity() {
        let cfg = HashConfig::new(0xfeed, 4, 1024, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000usize;
        let mut counts = vec![0u32; 1024];
        for _ in 0..n {
            for c in cfg.cell_indices(rng.gen()) {
                counts[c] += 1;
            }
        }
        for sub in 0..4 {
            let bins = &counts[sub * 256..(sub + 1) * 256];
            let expect = n as f64 / 256.0;
            let chi2: f64 = bins
                .iter()
                .map(|&c| {
                    let d = c as f64 - expect;
                    d * d / expect
                })
                .sum();
            let (mean, sd) = (255.0, (2.0 * 255.0f64).sqrt());
            assert!(
                (chi2 - mean).abs() < 5.0 * sd,
                "subtable {sub}: chi2 = {chi2:.1}, expected {mean} +/- {:.1}",
                5.0 * sd
            );
        }
    }

    #[test]
    fn test_checksum_range_lambda_13() {
        let cfg = HashConfig::new(3, 9, 288, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let v = cfg.checksum(rng.gen());
            assert!((1..8192).contains(&v), "checksum {v} out of [1, 2^13)");
        }
    }

    #[test]
    fn test_checksum_range_lambda_64() {
        let cfg = HashConfig::new(3, 2, 64, 64).unwrap();
        assert_ne!(cfg.checksum(12345), 0);
    }

    // Birthday bound: 10k keys into 2^16 - 1 checksum values gives
    // C(10000,2)/65535 ~ 762.9 colliding pairs, sd ~ sqrt thereof.
    #[test]
    fn test_checksum_collisions_near_birthday_rate() {
        let cfg = HashConfig::new(0xabcd, 8, 256, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 10_000u64;
        let mut counts = std::collections::HashMap::new();
        let mut seen = std::collections::HashSet::new();
        while (seen.len() as u64) < n {
            let x: u64 = rng.gen();
            if seen.insert(x) {
                *counts.entry(cfg.checksum(x)).or_insert(0u64) += 1;
            }
        }
        let pairs: u64 = counts.values().map(|&c| c * (c - 1) / 2).sum();
        let expect = (n * (n - 1) / 2) as f64 / 65535.0;
        let sd = expect.sqrt();
        assert!(
            (pairs as f64 - expect).abs() < 5.0 * sd,
            "colliding pairs {pairs}, expected {expect:.1} +/- {:.1}",
            5.0 * sd
        );
    }

    #[test]
    fn test_strata_layer_clamps_and_distributes() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 10_000;
        let layers = 16;
        let mut hist = vec![0u32; layers as usize];
        for _ in 0..n {
            let l = strata_layer(rng.gen(), 77, layers);
            assert!(l < layers);
            hist[l as usize] += 1;
        }
        // layer 0 is a fair coin
        let sd = (n as f64 * 0.25).sqrt();
        assert!((hist[0] as f64 - n as f64 / 2.0).abs() < 5.0 * sd);
        // geometric tail: layer 3 expects n/16
        let e3 = n as f64 / 16.0;
        assert!((hist[3] as f64 - e3).abs() < 5.0 * (e3 * (1.0 - 1.0 / 16.0)).sqrt());
    }

    #[test]
    fn test_f2_sign_balance_and_bucket_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let n = 10_000i64;
        let mut sum = 0i64;
        for _ in 0..n {
            let (b, s) = f2_hashes(rng.gen(), 5, 123, 64);
            assert!(b < 64);
            assert!(s == 1 || s == -1);
            sum += s;
        }
        let sd = (n as f64).sqrt();
        assert!(
            (sum as f64).abs() < 5.0 * sd,
            "sign sum {sum} too far from 0"
        );
    }

    // Same key in two different rows should agree on the bucket only at the
    // 1/B background rate.
    #[test]
    fn test_f2_rows_are_distinct_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 10_000;
        let mut same = 0u32;
        for _ in 0..n {
            let x = rng.gen();
            if f2_hashes(x, 0, 9, 64).0 == f2_hashes(x, 1, 9, 64).0 {
                same += 1;
            }
        }
        let expect = n as f64 / 64.0;
        let sd = (expect * (1.0 - 1.0 / 64.0)).sqrt();
        assert!((same as f64 - expect).abs() < 5.0 * sd);
    }

    #[test]
    fn test_families_disagree() {
        // two different tags must not produce the same stream
        let differs = (0u64..32).any(|x| {
            keyed(family_salt(5, TAG_CHECKSUM, 0), x)
                != keyed(family_salt(5, TAG_STRATA_LAYER, 0), x)
        });
        assert!(differs);
    }

    #[test]
    fn test_config_validation() {
        assert!(HashConfig::new(0, 1, 64, 16).is_err());
        assert!(HashConfig::new(0, 4, 0, 16).is_err());
        assert!(HashConfig::new(0, 4, 1022, 16).is_err());
        assert!(HashConfig::new(0, 9, 288, 12).is_err()); // needs 9 + 4 = 13
        assert!(HashConfig::new(0, 9, 288, 13).is_ok());
        assert!(HashConfig::new(0, 4, 1024, 65).is_err());
    }
}
