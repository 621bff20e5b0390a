//! Strata estimator for large symmetric differences. Every element lands in
//! one geometric sampling layer (layer l with probability 2^-(l+1)); each
//! layer is a cell table rated for m' elements. Estimation subtracts the two
//! sides layer by layer from the coarsest sample down, sums the decoded
//! counts, and scales by 2^(i+1) at the first layer that no longer decodes.
//! If every layer decodes the result is the exact difference size.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hashing::{self, strata_layer, HashConfig};
use crate::ibf::{self, Ibf};

/// Layer capacity for a (1 ± delta) estimate with failure budget epsilon:
/// m' = ceil(4 delta^-2 (2 + log2(2/epsilon)) ln 2).
pub fn strata_m_prime(delta: f64, epsilon: f64) -> Result<usize> {
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
    Ok((4.0 / (delta * delta) * (2.0 + (2.0 / epsilon).log2()) * 2f64.ln()).ceil() as usize)
}

/// Per-layer table config: k = ceil(log2(2 m' / epsilon)) + 1 subtables of
/// 2 m' cells.
fn layer_config(master_seed: u64, m_prime: usize, epsilon: f64) -> Result<HashConfig> {
    let k = (2.0 * m_prime as f64 / epsilon).log2().ceil() as u32 + 1;
    let lambda = (k + hashing::ceil_log2_u64(k as u64)).min(64);
    HashConfig::new(master_seed, k, 2 * m_prime * k as usize, lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrataEstimator {
    m_prime: usize,
    epsilon: f64,
    universe: u64,
    master_seed: u64,
    layers: Vec<Ibf>,
}

impl StrataEstimator {
    /// `universe` bounds the ids (exclusive); it fixes the layer count at
    /// ceil(log2 universe).
    pub fn empty(m_prime: usize, epsilon: f64, universe: u64, master_seed: u64) -> Result<Self> {
        if m_prime == 0 {
            return Err(Error::InvalidParams("m' must be at least 1".into()));
        }
        if universe < 2 {
            return Err(Error::InvalidParams(format!(
                "universe {universe} too small"
            )));
        }
        let config = layer_config(master_seed, m_prime, epsilon)?;
        let layer_count = hashing::ceil_log2_u64(universe);
        Ok(StrataEstimator {
            m_prime,
            epsilon,
            universe,
            master_seed,
            layers: (0..layer_count).map(|_| Ibf::new(config)).collect(),
        })
    }

    pub fn build(
        elements: &[u64],
        m_prime: usize,
        epsilon: f64,
        universe: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let mut s = Self::empty(m_prime, epsilon, universe, master_seed)?;
        for &x in elements {
            s.insert(x)?;
        }
        Ok(s)
    }

    pub fn layer_count(&self) -> u32 {
        self.layers.len() as u32
    }

    pub fn layers(&self) -> &[Ibf] {
        &self.layers
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime
    }

    pub fn insert(&mut self, x: u64) -> Result<()> {
        self.update(x, true)
    }

    pub fn delete(&mut self, x: u64) -> Result<()> {
        self.update(x, false)
    }

    fn update(&mut self, x: u64, forward: bool) -> Result<()> {
        if x >= self.universe {
            return Err(Error::InvalidParams(format!(
                "id {x} outside universe bound {}",
                self.universe
            )));
        }
        let l = strata_layer(x, self.master_seed, self.layer_count()) as usize;
        if forward {
            self.layers[l].insert(x);
        } else {
            self.layers[l].delete(x);
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.m_prime != other.m_prime
            || self.epsilon.to_bits() != other.epsilon.to_bits()
            || self.universe != other.universe
            || self.master_seed != other.master_seed
        {
            return Err(Error::ConfigMismatch(
                "strata estimator shapes differ".into(),
            ));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.sub_assign(b)?;
        }
        Ok(())
    }

    /// Estimate |A △ B| from the two sides' estimators. Exact whenever every
    /// layer's difference decodes (in particular for differences up to ~m').
    pub fn estimate(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let mut decoded: u64 = 0;
        for i in (0..self.layers.len()).rev() {
            let diff = self.layers[i].subtract(&other.layers[i])?;
            let r = diff.list_items(diff.config().table_size);
            if r.complete {
                decoded += (r.positive.len() + r.negative.len()) as u64;
            } else {
                return Ok(2f64.powi(i as i32 + 1) * decoded as f64);
            }
        }
        Ok(decoded as f64)
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.m_prime as u64).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        w.write_all(&self.universe.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        // layer directory: byte length of each layer block, then the blocks
        let blocks: Vec<Vec<u8>> = self
            .layers
            .iter()
            .map(|l| {
                let mut b = Vec::new();
                l.write_to(&mut b).map(|_| b)
            })
            .collect::<Result<_>>()?;
        for b in &blocks {
            w.write_all(&(b.len() as u64).to_le_bytes())?;
        }
        for b in &blocks {
            w.write_all(b)?;
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let m_prime = ibf::read_u64(r)? as usize;
        let epsilon = ibf::read_f64(r)?;
        let universe = ibf::read_u64(r)?;
        let master_seed = ibf::read_u64(r)?;
        let layer_count = ibf::read_u32(r)? as usize;
        if layer_count > 64 {
            return Err(Error::Corrupt("layer count out of range".into()));
        }
        let mut lens = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            lens.push(ibf::read_u64(r)?);
        }
        let layers = lens
            .iter()
            .map(|_| Ibf::read_from(r))
            .collect::<Result<Vec<_>>>()?;
        let s = StrataEstimator {
            m_prime,
            epsilon,
            universe,
            master_seed,
            layers,
        };
        let expect = Self::empty(m_prime, epsilon, universe, master_seed)
            .map_err(|e| Error::Corrupt(format!("bad strata header: {e}")))?;
        if s.layers.len() != expect.layers.len()
            || s.layers.first().map(|l| *l.config()) != expect.layers.first().map(|l| *l.config())
        {
            return Err(Error::Corrupt(
                "strata layers do not match their header".into(),
            ));
        }
        Ok(s)
    }
}
