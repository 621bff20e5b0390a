//! Invertible Bloom filter over 64-bit ids, the workhorse sketch.
//!
//! A table of `t` cells, each holding a signed occupancy count, the wrapping
//! sum of resident ids, and the wrapping sum of their checksums. Inserts and
//! deletes are cellwise adds/subtracts, which makes the whole thing linear:
//! subtracting two tables built under the same config leaves a table holding
//! exactly the symmetric difference, with shared elements cancelled. Decoding
//! peels cells of count ±1 whose checksum validates, so a table holding up to
//! roughly its rated capacity lists its contents exactly.

use std::collections::VecDeque;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hashing::{self, family_salt, keyed, HashConfig, TAG_CELL_INDEX, TAG_CHECKSUM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IbfCell {
    pub count: i64,
    pub id_sum: u64,
    pub g_sum: u64,
}

impl IbfCell {
    #[inline]
    pub fn is_zero(&self) -> bool {
        self.count == 0 && self.id_sum == 0 && self.g_sum == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Absent,
    Present,
    Undetermined,
}

/// What a decode produced. `positive` holds ids with net count +1 (present in
/// the minuend side), `negative` ids with net count -1. Order is peeling
/// order; callers wanting canonical output sort. `complete` is true iff the
/// table drained to all-zero, i.e. the lists are exact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeResult {
    pub positive: Vec<u64>,
    pub negative: Vec<u64>,
    pub complete: bool,
}

/// Table sized for difference capacity `m` with decode-failure budget
/// `epsilon`: k = ceil(log2(m/eps)) + 2 subtables of 2m cells each.
pub fn params_for(master_seed: u64, m: usize, epsilon: f64) -> Result<HashConfig> {
    if m == 0 {
        return Err(Error::InvalidParams("capacity m must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    let k = (m as f64 / epsilon).log2().ceil() as u32 + 2;
    let t = (2 * m)
        .checked_mul(k as usize)
        .ok_or_else(|| Error::InvalidParams(format!("table size overflow for m = {m}, k = {k}")))?;
    let lambda = (k + hashing::ceil_log2_u64(k as u64)).min(64);
    HashConfig::new(master_seed, k, t, lambda)
}

#[derive(Debug, Clone)]
pub struct Ibf {
    config: HashConfig,
    cells: Vec<IbfCell>,
    // salts cached off the config; derived state, excluded from equality
    cell_salts: Vec<u64>,
    checksum_salt: u64,
}

impl PartialEq for Ibf {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.cells == other.cells
    }
}
impl Eq for Ibf {}

impl Ibf {
    pub fn new(config: HashConfig) -> Self {
        let cell_salts = (0..config.k)
            .map(|i| family_salt(config.master_seed, TAG_CELL_INDEX, i))
            .collect();
        Ibf {
            cells: vec![IbfCell::default(); config.table_size],
            checksum_salt: family_salt(config.master_seed, TAG_CHECKSUM, 0),
            cell_salts,
            config,
        }
    }

    pub fn with_params(master_seed: u64, m: usize, epsilon: f64) -> Result<Self> {
        Ok(Ibf::new(params_for(master_seed, m, epsilon)?))
    }

    pub fn config(&self) -> &HashConfig {
        &self.config
    }

    pub fn cells(&self) -> &[IbfCell] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(IbfCell::is_zero)
    }

    #[inline]
    fn cell_of(&self, i: usize, x: u64) -> usize {
        let s = self.config.subtable_len();
        i * s + (keyed(self.cell_salts[i], x) % s as u64) as usize
    }

    #[inline]
    fn g(&self, x: u64) -> u64 {
        let modulus = if self.config.lambda == 64 {
            u64::MAX
        } else {
            self.config.checksum_mask()
        };
        keyed(self.checksum_salt, x) % modulus + 1
    }

    pub fn insert(&mut self, x: u64) {
        let g = self.g(x);
        for i in 0..self.config.k as usize {
            let at = self.cell_of(i, x);
            let c = &mut self.cells[at];
            c.count = c.count.wrapping_add(1);
            c.id_sum = c.id_sum.wrapping_add(x);
            c.g_sum = c.g_sum.wrapping_add(g);
        }
    }

    pub fn delete(&mut self, x: u64) {
        let g = self.g(x);
        for i in 0..self.config.k as usize {
            let at = self.cell_of(i, x);
            let c = &mut self.cells[at];
            c.count = c.count.wrapping_sub(1);
            c.id_sum = c.id_sum.wrapping_sub(x);
            c.g_sum = c.g_sum.wrapping_sub(g);
        }
    }

    pub fn insert_all<I: IntoIterator<Item = u64>>(&mut self, xs: I) {
        for x in xs {
            self.insert(x);
        }
    }

    fn check_compatible(&self, other: &Ibf) -> Result<()> {
        if self.config != other.config {
            return Err(Error::ConfigMismatch(format!(
                "{:?} vs {:?}",
                self.config, other.config
            )));
        }
        Ok(())
    }

    /// Cellwise `self - other`. Shared items cancel; the result holds the
    /// symmetric difference with signs (+ = only in self).
    pub fn subtract(&self, other: &Ibf) -> Result<Ibf> {
        let mut out = self.clone();
        out.sub_assign(other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Ibf) -> Result<Ibf> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Ibf) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.count = a.count.wrapping_add(b.count);
            a.id_sum = a.id_sum.wrapping_add(b.id_sum);
            a.g_sum = a.g_sum.wrapping_add(b.g_sum);
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Ibf) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.count = a.count.wrapping_sub(b.count);
            a.id_sum = a.id_sum.wrapping_sub(b.id_sum);
            a.g_sum = a.g_sum.wrapping_sub(b.g_sum);
        }
        Ok(())
    }

    /// Probe without decoding. Any all-zero cell proves absence; an exact
    /// singleton cell proves presence; a fully collided neighborhood proves
    /// nothing.
    pub fn is_member(&self, x: u64) -> Membership {
        let g = self.g(x);
        let mask = self.config.checksum_mask();
        for i in 0..self.config.k as usize {
            let c = self.cells[self.cell_of(i, x)];
            if c.is_zero() {
                return Membership::Absent;
            }
            if c.count == 1 && c.id_sum == x && c.g_sum & mask == g {
                return Membership::Present;
            }
        }
        Membership::Undetermined
    }

    /// Peel the table. Cells with count ±1 whose checksum sum validates
    /// (comparisons are modulo 2^lambda) emit their resident, the resident is
    /// cancelled out of its other cells, and any cell that lands on count ±1
    /// re-enters the worklist. Stops when nothing is peelable or after
    /// `max_items` emissions, so a hopelessly overloaded table costs
    /// O(t + k * max_items), not forever.
    pub fn list_items(&self, max_items: usize) -> DecodeResult {
        let mut cells = self.cells.clone();
        let mut queue: VecDeque<usize> = (0..cells.len())
            .filter(|&i| cells[i].count == 1 || cells[i].count == -1)
            .collect();
        let mask = self.config.checksum_mask();
        let mut positive = Vec::new();
        let mut negative = Vec::new();

        while positive.len() + negative.len() < max_items {
            let Some(i) = queue.pop_front() else { break };
            let c = cells[i];
            let (x, forward) = if c.count == 1 && c.g_sum & mask == self.g(c.id_sum) {
                (c.id_sum, true)
            } else if c.count == -1
                && c.g_sum.wrapping_neg() & mask == self.g(c.id_sum.wrapping_neg())
            {
                (c.id_sum.wrapping_neg(), false)
            } else {
                continue; // stale or not a valid singleton
            };

            let g = self.g(x);
            for k in 0..self.config.k as usize {
                let idx = self.cell_of(k, x);
                let cell = &mut cells[idx];
                if forward {
                    cell.count = cell.count.wrapping_sub(1);
                    cell.id_sum = cell.id_sum.wrapping_sub(x);
                    cell.g_sum = cell.g_sum.wrapping_sub(g);
                } else {
                    cell.count = cell.count.wrapping_add(1);
                    cell.id_sum = cell.id_sum.wrapping_add(x);
                    cell.g_sum = cell.g_sum.wrapping_add(g);
                }
                if cell.count == 1 || cell.count == -1 {
                    queue.push_back(idx);
                }
            }
            if forward {
                positive.push(x);
            } else {
                negative.push(x);
            }
        }

        DecodeResult {
            positive,
            negative,
            complete: cells.iter().all(IbfCell::is_zero),
        }
    }

    // --- binary layout -----------------------------------------------------
    //
    // magic "IBF1", version u16, master_seed u64, k u32, t u64, lambda u32,
    // then t cells in index order as (count i64, id_sum u64, g_sum u64).
    // Everything little-endian. Round-trips bit-exactly.

    pub const MAGIC: [u8; 4] = *b"IBF1";
    pub const VERSION: u16 = 1;

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&self.config.master_seed.to_le_bytes())?;
        w.write_all(&self.config.k.to_le_bytes())?;
        w.write_all(&(self.config.table_size as u64).to_le_bytes())?;
        w.write_all(&self.config.lambda.to_le_bytes())?;
        for c in &self.cells {
            w.write_all(&c.count.to_le_bytes())?;
            w.write_all(&c.id_sum.to_le_bytes())?;
            w.write_all(&c.g_sum.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Ibf> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != Self::MAGIC {
            return Err(Error::Corrupt("bad cell-table magic".into()));
        }
        if read_u16(r)? != Self::VERSION {
            return Err(Error::Corrupt("unsupported cell-table version".into()));
        }
        let master_seed = read_u64(r)?;
        let k = read_u32(r)?;
        let t = read_u64(r)? as usize;
        let lambda = read_u32(r)?;
        let config = HashConfig::new(master_seed, k, t, lambda)
            .map_err(|e| Error::Corrupt(format!("bad cell-table header: {e}")))?;
        let mut ibf = Ibf::new(config);
        for c in &mut ibf.cells {
            c.count = i64::from_le_bytes(read_array(r)?);
            c.id_sum = read_u64(r)?;
            c.g_sum = read_u64(r)?;
        }
        Ok(ibf)
    }
}

pub(crate) fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
pub(crate) fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    Ok(u16::from_le_bytes(read_array(r)?))
}
pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}
pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}
pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_params_for_pinned_values() {
        let c = params_for(0, 8, 1.0 / 16.0).unwrap();
        assert_eq!((c.k, c.table_size, c.lambda), (9, 144, 13));
        let c = params_for(0, 1, 0.5).unwrap();
        assert_eq!((c.k, c.table_size, c.lambda), (3, 6, 5));
        let c = params_for(0, 16, 0.1).unwrap();
        assert_eq!((c.k, c.table_size), (10, 320));
    }

    #[test]
    fn test_params_for_rejects_bad_inputs() {
        assert!(params_for(0, 0, 0.1).is_err());
        assert!(params_for(0, 8, 0.0).is_err());
        assert!(params_for(0, 8, 1.0).is_err());
        assert!(params_for(0, 8, -0.5).is_err());
    }

    #[test]
    fn test_insert_touches_k_cells() {
        let mut ibf = Ibf::with_params(42, 1, 0.5).unwrap(); // k=3, t=6
        ibf.insert(5);
        let ones: Vec<_> = ibf.cells().iter().filter(|c| c.count == 1).collect();
        assert_eq!(ones.len(), 3);
        for c in ones {
            assert_eq!(c.id_sum, 5);
            assert_eq!(c.g_sum, ibf.g(5));
        }
    }

    #[test]
    fn test_delete_on_empty_wraps() {
        let mut ibf = Ibf::with_params(42, 1, 0.5).unwrap();
        ibf.delete(9);
        let hit: Vec<_> = ibf.cells().iter().filter(|c| !c.is_zero()).collect();
        assert_eq!(hit.len(), 3);
        for c in hit {
            assert_eq!(c.count, -1);
            assert_eq!(c.id_sum, 0u64.wrapping_sub(9));
        }
    }

    #[test]
    fn test_insert_delete_cancels() {
        let mut ibf = Ibf::with_params(7, 8, 0.1).unwrap();
        for x in [3u64, 0, u64::MAX, 1 << 47] {
            ibf.insert(x);
        }
        for x in [3u64, 0, u64::MAX, 1 << 47] {
            ibf.delete(x);
        }
        assert!(ibf.is_empty());
    }

    #[test]
    fn test_membership() {
        let mut ibf = Ibf::with_params(1, 8, 1.0 / 16.0).unwrap();
        for x in 100..105 {
            ibf.insert(x);
        }
        for x in 100..105 {
            assert_eq!(ibf.is_member(x), Membership::Present);
        }
        assert_eq!(ibf.is_member(999), Membership::Absent);
        assert_eq!(
            Ibf::with_params(1, 8, 0.1).unwrap().is_member(5),
            Membership::Absent
        );
    }

    #[test]
    fn test_membership_undetermined_under_heavy_load() {
        // tiny table, everything multiply occupied
        let mut ibf = Ibf::new(HashConfig::new(3, 3, 12, 5).unwrap());
        for x in 1000..1200 {
            ibf.insert(x);
        }
        assert_eq!(ibf.is_member(5), Membership::Undetermined);
    }

    #[test]
    fn test_subtract_decodes_difference() {
        let mut a = Ibf::with_params(11, 8, 1.0 / 16.0).unwrap();
        let mut b = Ibf::with_params(11, 8, 1.0 / 16.0).unwrap();
        for x in 1..=20u64 {
            a.insert(x);
            if x != 3 && x != 7 {
                b.insert(x);
            }
        }
        b.insert(999);
        let r = a.subtract(&b).unwrap().list_items(8);
        assert!(r.complete);
        let mut pos = r.positive.clone();
        pos.sort_unstable();
        assert_eq!(pos, vec![3, 7]);
        assert_eq!(r.negative, vec![999]);
    }

    #[test]
    fn test_subtract_rejects_mismatched_configs() {
        let a = Ibf::with_params(1, 8, 0.1).unwrap();
        let b = Ibf::with_params(2, 8, 0.1).unwrap();
        assert!(matches!(a.subtract(&b), Err(Error::ConfigMismatch(_))));
        let c = Ibf::with_params(1, 16, 0.1).unwrap();
        assert!(matches!(a.add(&c), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn test_overload_fails_cleanly() {
        let mut ibf = Ibf::with_params(5, 4, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..64 {
            ibf.insert(rng.gen::<u64>() >> 16);
        }
        let r = ibf.list_items(4);
        assert!(!r.complete);
        assert!(r.positive.len() + r.negative.len() <= 4);
    }

    #[test]
    fn test_max_items_stops_listing() {
        let mut ibf = Ibf::with_params(5, 16, 0.1).unwrap();
        for x in 0..10u64 {
            ibf.insert(x);
        }
        let r = ibf.list_items(5);
        assert_eq!(r.positive.len() + r.negative.len(), 5);
        assert!(!r.complete);
        let full = ibf.list_items(16);
        assert!(full.complete);
        assert_eq!(full.positive.len(), 10);
    }

    #[test]
    fn test_zero_id_decodes() {
        let mut ibf = Ibf::with_params(8, 4, 0.25).unwrap();
        ibf.insert(0);
        let r = ibf.list_items(4);
        assert!(r.complete);
        assert_eq!(r.positive, vec![0]);
    }

    #[test]
    fn test_decode_failure_rate_within_budget() {
        // rated capacity 8 at eps = 0.25; the observed failure rate must stay
        // under eps plus 3 binomial sigmas (it is far lower in practice)
        let trials = 300;
        let eps = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut failures = 0;
        for t in 0..trials {
            let mut a = Ibf::with_params(1000 + t, 8, eps).unwrap();
            let mut b = Ibf::with_params(1000 + t, 8, eps).unwrap();
            let mut ids = std::collections::HashSet::new();
            while ids.len() < 48 {
                ids.insert(rng.gen::<u64>() >> 16);
            }
            let ids: Vec<_> = ids.into_iter().collect();
            for (i, &x) in ids.iter().enumerate() {
                if i < 40 {
                    a.insert(x);
                    b.insert(x);
                } else if i < 44 {
                    a.insert(x);
                } else {
                    b.insert(x);
                }
            }
            let r = a.subtract(&b).unwrap().list_items(8);
            if !r.complete {
                failures += 1;
            } else {
                let mut pos = r.positive.clone();
                pos.sort_unstable();
                let mut want_pos: Vec<_> = ids[40..44].to_vec();
                want_pos.sort_unstable();
                assert_eq!(pos, want_pos);
            }
        }
        let sigma = (eps * (1.0 - eps) / trials as f64).sqrt();
        assert!(
            (failures as f64 / trials as f64) <= eps + 3.0 * sigma,
            "failure rate {} over budget",
            failures as f64 / trials as f64
        );
    }

    #[test]
    fn test_serialization_round_trip() {
        let mut ibf = Ibf::with_params(0xdead_beef, 8, 1.0 / 16.0).unwrap();
        for x in 0..13u64 {
            ibf.insert(x * x + 1);
        }
        ibf.delete(4);
        let mut buf = Vec::new();
        ibf.write_to(&mut buf).unwrap();
        // header: 4 + 2 + 8 + 4 + 8 + 4 bytes, then 24 per cell
        assert_eq!(buf.len(), 30 + 24 * 144);
        let back = Ibf::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(ibf, back);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            Ibf::read_from(&mut bad.as_slice()),
            Err(Error::Corrupt(_))
        ));
        let mut short = buf.clone();
        short.truncate(40);
        assert!(Ibf::read_from(&mut short.as_slice()).is_err());
    }

    proptest! {
        // linearity: building from a disjoint union equals adding the parts,
        // and add followed by subtract restores the original, bit for bit
        #[test]
        fn prop_linearity(p in proptest::collection::vec(0u64..1000, 0..60),
                          q in proptest::collection::vec(0u64..1000, 0..60),
                          seed in 0u64..1000) {
            let mut ip = Ibf::with_params(seed, 4, 0.5).unwrap();
            ip.insert_all(p.iter().copied());
            let mut iq = Ibf::with_params(seed, 4, 0.5).unwrap();
            iq.insert_all(q.iter().copied());
            let mut iboth = Ibf::with_params(seed, 4, 0.5).unwrap();
            iboth.insert_all(p.iter().chain(q.iter()).copied());
            let sum = ip.add(&iq).unwrap();
            prop_assert_eq!(&sum, &iboth);
            prop_assert_eq!(&sum.subtract(&iq).unwrap(), &ip);
        }
    }
}
