//! Set-difference reporting sketches: a cell table rated for a known
//! difference capacity, and a ladder of them at power-of-two capacities for
//! the doubling search when the difference size is unknown up front.

use std::borrow::Cow;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hashing::ceil_log2_u64;
use crate::ibf::{self, params_for, DecodeResult, Ibf};

/// Smallest ladder capacity is 2^3 = 8: differences smaller than that cost
/// next to nothing extra at capacity 8, and it avoids a tail of tiny tables.
pub const J_MIN: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SdrFixed {
    capacity: usize,
    epsilon: f64,
    ibf: Ibf,
}

impl SdrFixed {
    /// Sketch `elements` for differences up to `m`. The element count may
    /// exceed `m` — only the *difference* against another sketch has to fit.
    pub fn build(elements: &[u64], m: usize, epsilon: f64, master_seed: u64) -> Result<SdrFixed> {
        let mut s = SdrFixed::empty(m, epsilon, master_seed)?;
        s.ibf.insert_all(elements.iter().copied());
        Ok(s)
    }

    pub fn empty(m: usize, epsilon: f64, master_seed: u64) -> Result<SdrFixed> {
        Ok(SdrFixed {
            capacity: m,
            epsilon,
            ibf: Ibf::new(params_for(master_seed, m, epsilon)?),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn ibf(&self) -> &Ibf {
        &self.ibf
    }

    pub fn insert(&mut self, x: u64) {
        self.ibf.insert(x);
    }

    fn check_compatible(&self, other: &SdrFixed) -> Result<()> {
        if self.capacity != other.capacity || self.epsilon.to_bits() != other.epsilon.to_bits() {
            return Err(Error::ConfigMismatch(format!(
                "difference sketches rated (m={}, eps={}) vs (m={}, eps={})",
                self.capacity, self.epsilon, other.capacity, other.epsilon
            )));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &SdrFixed) -> Result<()> {
        self.check_compatible(other)?;
        self.ibf.add_assign(&other.ibf)
    }

    pub fn sub_assign(&mut self, other: &SdrFixed) -> Result<()> {
        self.check_compatible(other)?;
        self.ibf.sub_assign(&other.ibf)
    }

    /// Decode the difference against `other`, listing at most the rated
    /// capacity. `complete == false` means the difference did not fit (or the
    /// peel got unlucky); the partial lists are then not trustworthy.
    pub fn report(&self, other: &SdrFixed) -> Result<DecodeResult> {
        self.check_compatible(other)?;
        Ok(self.ibf.subtract(&other.ibf)?.list_items(self.capacity))
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.capacity as u64).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        self.ibf.write_to(w)
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<SdrFixed> {
        let capacity = ibf::read_u64(r)? as usize;
        let epsilon = ibf::read_f64(r)?;
        Ok(SdrFixed {
            capacity,
            epsilon,
            ibf: Ibf::read_from(r)?,
        })
    }
}

/// Which capacities a ladder covers and how the failure budget is split.
/// The budget is divided evenly across the whole doubling search (j_min ..=
/// j_max), so every canonical set in an index derives the *same* per-level
/// config and same-level sketches stay combinable regardless of set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPlan {
    pub j_min: u32,
    pub j_max: u32,
    pub epsilon: f64,
}

impl LevelPlan {
    /// Plan for a dataset of `n` items: capacities 8 up to 2^(ceil(log2 n)+1),
    /// enough that even a difference touching everything fits the top level.
    pub fn for_dataset(n: usize, epsilon: f64) -> Result<LevelPlan> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {epsilon} outside (0, 1)"
            )));
        }
        let top = ceil_log2_u64(n.max(1) as u64) + 1;
        Ok(LevelPlan {
            j_min: J_MIN,
            j_max: top.max(J_MIN),
            epsilon,
        })
    }

    pub fn level_count(&self) -> u32 {
        self.j_max - self.j_min + 1
    }

    pub fn level_epsilon(&self) -> f64 {
        self.epsilon / self.level_count() as f64
    }

    pub fn contains(&self, j: u32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    pub(crate) fn check_valid(&self) -> Result<()> {
        if self.j_min < J_MIN || self.j_max < self.j_min || self.j_max > 62 {
            return Err(Error::InvalidParams(format!("bad level plan {self:?}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Ladder of difference sketches at capacities 2^j. Stored levels stop at the
/// set's own size (capacity beyond that is cheaper to build on demand from
/// the element list than to keep around).
#[derive(Debug, Clone, PartialEq)]
pub struct SdrHier {
    plan: LevelPlan,
    ladder_top: u32,
    levels: Vec<SdrFixed>,
}

impl SdrHier {
    pub fn build(elements: &[u64], plan: &LevelPlan, master_seed: u64) -> Result<SdrHier> {
        plan.check_valid()?;
        let ladder_top = Self::top_for(elements.len(), plan);
        let mut levels = Vec::with_capacity((ladder_top - plan.j_min + 1) as usize);
        for j in plan.j_min..=ladder_top {
            levels.push(SdrFixed::build(
                elements,
                1usize << j,
                plan.level_epsilon(),
                master_seed,
            )?);
        }
        Ok(SdrHier {
            plan: *plan,
            ladder_top,
            levels,
        })
    }

    fn top_for(len: usize, plan: &LevelPlan) -> u32 {
        ceil_log2_u64(len.max(1) as u64).clamp(plan.j_min, plan.j_max)
    }

    pub fn plan(&self) -> &LevelPlan {
        &self.plan
    }

    pub fn ladder_top(&self) -> u32 {
        self.ladder_top
    }

    pub fn levels(&self) -> &[SdrFixed] {
        &self.levels
    }

    pub fn stored_level(&self, j: u32) -> Option<&SdrFixed> {
        (self.plan.j_min..=self.ladder_top)
            .contains(&j)
            .then(|| &self.levels[(j - self.plan.j_min) as usize])
    }

    /// Level-j sketch: the stored one when the ladder reaches j, otherwise a
    /// fresh build over the canonical set's elements — bit-identical to what
    /// a direct build would have produced, at O(2^j + |elements|) cost.
    pub fn level_or_build(
        &self,
        j: u32,
        elements: &[u64],
        master_seed: u64,
    ) -> Result<Cow<'_, SdrFixed>> {
        if !self.plan.contains(j) {
            return Err(Error::InvalidParams(format!(
                "level {j} outside plan {}..={}",
                self.plan.j_min, self.plan.j_max
            )));
        }
        match self.stored_level(j) {
            Some(s) => Ok(Cow::Borrowed(s)),
            None => Ok(Cow::Owned(SdrFixed::build(
                elements,
                1usize << j,
                self.plan.level_epsilon(),
                master_seed,
            )?)),
        }
    }

    fn check_compatible(&self, other: &SdrHier) -> Result<()> {
        if self.plan.j_min != other.plan.j_min
            || self.plan.j_max != other.plan.j_max
            || self.plan.epsilon.to_bits() != other.plan.epsilon.to_bits()
            || self.ladder_top != other.ladder_top
        {
            return Err(Error::ConfigMismatch(format!(
                "ladders differ: {:?}/top {} vs {:?}/top {}",
                self.plan, self.ladder_top, other.plan, other.ladder_top
            )));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &SdrHier) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &SdrHier) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.sub_assign(b)?;
        }
        Ok(())
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.plan.j_min.to_le_bytes())?;
        w.write_all(&self.plan.j_max.to_le_bytes())?;
        w.write_all(&self.plan.epsilon.to_le_bytes())?;
        w.write_all(&self.ladder_top.to_le_bytes())?;
        for l in &self.levels {
            l.write_to(w)?;
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<SdrHier> {
        let j_min = ibf::read_u32(r)?;
        let j_max = ibf::read_u32(r)?;
        let epsilon = ibf::read_f64(r)?;
        let plan = LevelPlan {
            j_min,
            j_max,
            epsilon,
        };
        plan.check_valid()
            .map_err(|e| Error::Corrupt(format!("bad ladder header: {e}")))?;
        let ladder_top = ibf::read_u32(r)?;
        if !(j_min..=j_max).contains(&ladder_top) {
            return Err(Error::Corrupt("ladder top outside plan".into()));
        }
        let levels = (j_min..=ladder_top)
            .map(|_| SdrFixed::read_from(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(SdrHier {
            plan,
            ladder_top,
            levels,
        })
    }
}
