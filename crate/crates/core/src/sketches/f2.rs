//! Second-moment sketch: R rows of B signed counters. Each update adds
//! sign(x, row) to one bucket per row; the estimate is the median over rows of
//! the row's sum of squared counters. For a difference of two indicator
//! vectors the coordinates are ±1, so the second moment *is* the Hamming
//! distance — subtract two sketches and estimate.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hashing::f2_hashes;
use crate::ibf::{self};

/// Rows and buckets for a (1 ± delta) estimate with failure budget epsilon:
/// B = ceil(4 / delta^2) buckets, median over R = ceil(8 ln(1/epsilon)) rows.
pub fn f2_params(delta: f64, epsilon: f64) -> Result<(u32, usize)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta = {delta} outside (0, 1]"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    let rows = (8.0 * (1.0 / epsilon).ln()).ceil() as u32;
    let buckets = (4.0 / (delta * delta)).ceil() as usize;
    Ok((rows.max(1), buckets.max(1)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct F2Sketch {
    rows: u32,
    buckets: usize,
    delta: f64,
    epsilon: f64,
    master_seed: u64,
    /// row-major, rows * buckets
    counters: Vec<i64>,
}

impl F2Sketch {
    pub fn empty(delta: f64, epsilon: f64, master_seed: u64) -> Result<F2Sketch> {
        let (rows, buckets) = f2_params(delta, epsilon)?;
        Ok(F2Sketch {
            rows,
            buckets,
            delta,
            epsilon,
            master_seed,
            counters: vec![0; rows as usize * buckets],
        })
    }

    pub fn build(elements: &[u64], delta: f64, epsilon: f64, master_seed: u64) -> Result<F2Sketch> {
        let mut s = F2Sketch::empty(delta, epsilon, master_seed)?;
        for &x in elements {
            s.update(x, 1);
        }
        Ok(s)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    /// Add `v` times the indicator of `x` (v = 1 insert, -1 delete).
    pub fn update(&mut self, x: u64, v: i64) {
        for row in 0..self.rows {
            let (b, s) = f2_hashes(x, row, self.master_seed, self.buckets);
            let c = &mut self.counters[row as usize * self.buckets + b];
            *c = c.wrapping_add(s.wrapping_mul(v));
        }
    }

    fn check_compatible(&self, other: &F2Sketch) -> Result<()> {
        if self.rows != other.rows
            || self.buckets != other.buckets
            || self.master_seed != other.master_seed
            || self.delta.to_bits() != other.delta.to_bits()
            || self.epsilon.to_bits() != other.epsilon.to_bits()
        {
            return Err(Error::ConfigMismatch(
                "second-moment sketch shapes differ".into(),
            ));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &F2Sketch) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a = a.wrapping_add(*b);
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &F2Sketch) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a = a.wrapping_sub(*b);
        }
        Ok(())
    }

    pub fn subtract(&self, other: &F2Sketch) -> Result<F2Sketch> {
        let mut out = self.clone();
        out.sub_assign(other)?;
        Ok(out)
    }

    /// Median over rows of the row-wise sum of squared counters.
    pub fn estimate(&self) -> f64 {
        let mut per_row: Vec<f64> = (0..self.rows as usize)
            .map(|r| {
                self.counters[r * self.buckets..(r + 1) * self.buckets]
                    .iter()
                    .map(|&c| (c as i128 * c as i128) as u128)
                    .sum::<u128>() as f64
            })
            .collect();
        per_row.sort_by(|a, b| a.total_cmp(b));
        let n = per_row.len();
        if n == 0 {
            return 0.0;
        }
        if n % 2 == 1 {
            per_row[n / 2]
        } else {
            (per_row[n / 2 - 1] + per_row[n / 2]) / 2.0
        }
    }

    /// Estimated Hamming distance between the indicator vectors behind the
    /// two sketches.
    pub fn hamming_estimate(&self, other: &F2Sketch) -> Result<f64> {
        Ok(self.subtract(other)?.estimate())
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.rows.to_le_bytes())?;
        w.write_all(&(self.buckets as u64).to_le_bytes())?;
        w.write_all(&self.delta.to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        for c in &self.counters {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<F2Sketch> {
        let rows = ibf::read_u32(r)?;
        let buckets = ibf::read_u64(r)? as usize;
        let delta = ibf::read_f64(r)?;
        let epsilon = ibf::read_f64(r)?;
        let master_seed = ibf::read_u64(r)?;
        let n = (rows as usize)
            .checked_mul(buckets)
            .filter(|&n| n > 0 && n <= (1 << 32))
            .ok_or_else(|| Error::Corrupt("bad sketch shape".into()))?;
        let mut counters = vec![0i64; n];
        for c in &mut counters {
            *c = i64::from_le_bytes(ibf::read_array(r)?);
        }
        Ok(F2Sketch {
            rows,
            buckets,
            delta,
            epsilon,
            master_seed,
            counters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_params_pinned_values() {
        // delta 0.25 -> 64 buckets; eps 0.05 -> ceil(8 * ln 20) = 24 rows
        assert_eq!(f2_params(0.25, 0.05).unwrap(), (24, 64));
        assert!(f2_params(0.0, 0.05).is_err());
        assert!(f2_params(0.25, 1.0).is_err());
    }

    #[test]
    fn test_identical_sides_give_exact_zero() {
        let elems: Vec<u64> = (0..500).collect();
        let a = F2Sketch::build(&elems, 0.25, 0.05, 7).unwrap();
        let b = F2Sketch::build(&elems, 0.25, 0.05, 7).unwrap();
        assert_eq!(a.hamming_estimate(&b).unwrap(), 0.0);
    }

    #[test]
    fn test_single_coordinate_estimates_exactly_one() {
        let a = F2Sketch::build(&[12345], 0.25, 0.05, 3).unwrap();
        let b = F2Sketch::empty(0.25, 0.05, 3).unwrap();
        assert_eq!(a.hamming_estimate(&b).unwrap(), 1.0);
        assert_eq!(b.subtract(&a).unwrap().estimate(), 1.0); // sign-symmetric
    }

    #[test]
    fn test_linearity_bit_exact() {
        let p: Vec<u64> = (0..100).collect();
        let q: Vec<u64> = (100..150).collect();
        let both: Vec<u64> = (0..150).collect();
        let sp = F2Sketch::build(&p, 0.5, 0.1, 9).unwrap();
        let sq = F2Sketch::build(&q, 0.5, 0.1, 9).unwrap();
        let sboth = F2Sketch::build(&both, 0.5, 0.1, 9).unwrap();
        let mut sum = sp.clone();
        sum.add_assign(&sq).unwrap();
        assert_eq!(sum, sboth);
        sum.sub_assign(&sq).unwrap();
        assert_eq!(sum, sp);
    }

    #[test]
    fn test_mismatched_shapes_rejected() {
        let a = F2Sketch::empty(0.25, 0.05, 1).unwrap();
        let b = F2Sketch::empty(0.5, 0.05, 1).unwrap();
        assert!(a.subtract(&b).is_err());
        let c = F2Sketch::empty(0.25, 0.05, 2).unwrap();
        assert!(a.subtract(&c).is_err());
    }

    #[test]
    fn test_accuracy_on_planted_difference() {
        // planted Hamming distance 200 between sets of 600; at delta = 0.25
        // the estimate should land in [150, 250] nearly always
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let trials = 100;
        let mut hits = 0;
        for t in 0..trials {
            let shared: Vec<u64> = (0..500).map(|_| rng.gen::<u64>() >> 20).collect();
            let only_a: Vec<u64> = (0..100).map(|_| rng.gen::<u64>() >> 20).collect();
            let only_b: Vec<u64> = (0..100).map(|_| rng.gen::<u64>() >> 20).collect();
            let mut ea: Vec<u64> = shared.clone();
            ea.extend(&only_a);
            let mut eb: Vec<u64> = shared;
            eb.extend(&only_b);
            let sa = F2Sketch::build(&ea, 0.25, 0.05, 9000 + t).unwrap();
            let sb = F2Sketch::build(&eb, 0.25, 0.05, 9000 + t).unwrap();
            let est = sa.hamming_estimate(&sb).unwrap();
            if (150.0..=250.0).contains(&est) {
                hits += 1;
            }
        }
        assert!(
            hits * 10 >= trials * 9,
            "only {hits}/{trials} inside (1±0.25)·200"
        );
    }

    #[test]
    fn test_serialization_round_trip() {
        let s = F2Sketch::build(&[1, 2, 3, 99], 0.5, 0.2, 42).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = F2Sketch::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }
}
