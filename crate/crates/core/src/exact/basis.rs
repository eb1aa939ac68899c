//! Truncated spin ⊗ Fock product basis with Z₂ parity sectors.
//!
//! Each site owns one register holding its spin and one bosonic mode
//! (the local phonon, or collective mode k in the collective
//! representation). Register digit = s·(n_cut+1) + n with s = 0 for ↑,
//! and site 0 is the most significant register.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    LocalModes,
    CollectiveModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Parity +1.
    Even,
    /// Parity −1.
    Odd,
    Full,
}

impl Sector {
    pub fn of_parity(p: i32) -> Sector {
        if p > 0 {
            Sector::Even
        } else {
            Sector::Odd
        }
    }
}

/// Default cap on the number of basis states.
pub const DEFAULT_DIMENSION_BUDGET: u128 = 1 << 23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n_ions: usize,
    pub representation: Representation,
    /// One maximum phonon number per mode.
    pub cutoffs: Vec<usize>,
    pub sector: Sector,
    #[serde(default = "default_budget")]
    pub budget: u128,
}

fn default_budget() -> u128 {
    DEFAULT_DIMENSION_BUDGET
}

impl BasisSpec {
    pub fn local(n_ions: usize, cutoff: usize, sector: Sector) -> Self {
        BasisSpec {
            n_ions,
            representation: Representation::LocalModes,
            cutoffs: vec![cutoff; n_ions],
            sector,
            budget: DEFAULT_DIMENSION_BUDGET,
        }
    }

    pub fn collective(cutoffs: Vec<usize>, sector: Sector) -> Self {
        BasisSpec {
            n_ions: cutoffs.len(),
            representation: Representation::CollectiveModes,
            cutoffs,
            sector,
            budget: DEFAULT_DIMENSION_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    /// Dimension of the requested sector, or `None` on overflow.
    pub fn dimension(&self) -> Option<u128> {
        let full = full_dimension(&self.cutoffs)?;
        Some(match self.sector {
            Sector::Full => full,
            // flipping spin 0 maps one sector onto the other
            _ => full / 2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::invalid("basis needs at least one site"));
        }
        if self.cutoffs.len() != self.n_ions {
            return Err(Error::invalid(format!(
                "{} cutoffs for {} sites",
                self.cutoffs.len(),
                self.n_ions
            )));
        }
        let dim = self.dimension();
        let over = dim.is_none_or(|d| d > self.budget || d > u32::MAX as u128);
        if over {
            let (dimension, log2) = super::estimate_dimension(self.n_ions, &self.cutoffs)?;
            let dimension = if self.sector == Sector::Full {
                dimension
            } else {
                dimension / 2
            };
            let log2 = if self.sector == Sector::Full { log2 } else { log2 - 1.0 };
            return Err(Error::ResourceGuard {
                dimension,
                log2,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

pub(crate) fn full_dimension(cutoffs: &[usize]) -> Option<u128> {
    cutoffs
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(2 * (c as u128 + 1)))
}

#[derive(Debug, Clone)]
pub struct Basis {
    spec: BasisSpec,
    levels: Vec<u64>,
    strides: Vec<u64>,
    full_dim: u64,
    /// Full-space index of each sector state; empty for the full space.
    states: Vec<u64>,
    /// Full index → sector index, `u32::MAX` when outside the sector.
    lookup: Vec<u32>,
}

impl Basis {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_ions;
        let levels: Vec<u64> = spec.cutoffs.iter().map(|&c| c as u64 + 1).collect();
        let mut strides = vec![1u64; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * 2 * levels[i + 1];
        }
        let full_dim = strides[0] * 2 * levels[0];
        let mut basis = Basis {
            spec,
            levels,
            strides,
            full_dim,
            states: Vec::new(),
            lookup: Vec::new(),
        };
        let want = match basis.spec.sector {
            Sector::Full => return Ok(basis),
            Sector::Even => 1,
            Sector::Odd => -1,
        };
        let mut lookup = vec![u32::MAX; full_dim as usize];
        let mut states = Vec::with_capacity(full_dim as usize / 2);
        for f in 0..full_dim {
            if basis.parity_of_full(f) == want {
                lookup[f as usize] = states.len() as u32;
                states.push(f);
            }
        }
        basis.states = states;
        basis.lookup = lookup;
        Ok(basis)
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_ions
    }

    pub fn cutoff(&self, site: usize) -> usize {
        self.spec.cutoffs[site]
    }

    pub fn dim(&self) -> usize {
        if self.spec.sector == Sector::Full {
            self.full_dim as usize
        } else {
            self.states.len()
        }
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim as usize
    }

    pub fn full_index(&self, r: usize) -> u64 {
        if self.spec.sector == Sector::Full {
            r as u64
        } else {
            self.states[r]
        }
    }

    pub fn index_of(&self, full: u64) -> Option<usize> {
        if self.spec.sector == Sector::Full {
            (full < self.full_dim).then_some(full as usize)
        } else {
            match self.lookup.get(full as usize) {
                Some(&i) if i != u32::MAX => Some(i as usize),
                _ => None,
            }
        }
    }

    pub(crate) fn stride(&self, site: usize) -> u64 {
        self.strides[site]
    }

    fn digit(&self, full: u64, site: usize) -> u64 {
        (full / self.strides[site]) % (2 * self.levels[site])
    }

    /// True when the spin on `site` is ↓.
    pub fn is_down_full(&self, full: u64, site: usize) -> bool {
        self.digit(full, site) >= self.levels[site]
    }

    pub fn phonons_full(&self, full: u64, site: usize) -> usize {
        (self.digit(full, site) % self.levels[site]) as usize
    }

    /// Decode into (down flags, phonon numbers).
    pub fn decode(&self, full: u64) -> (Vec<bool>, Vec<usize>) {
        let n = self.n_sites();
        let mut downs = Vec::with_capacity(n);
        let mut ns = Vec::with_capacity(n);
        for i in 0..n {
            let d = self.digit(full, i);
            downs.push(d >= self.levels[i]);
            ns.push((d % self.levels[i]) as usize);
        }
        (downs, ns)
    }

    pub fn encode(&self, downs: &[bool], phonons: &[usize]) -> Result<u64> {
        let n = self.n_sites();
        if downs.len() != n || phonons.len() != n {
            return Err(Error::invalid("product state has wrong number of sites"));
        }
        let mut f = 0;
        for i in 0..n {
            if phonons[i] as u64 >= self.levels[i] {
                return Err(Error::invalid(format!(
                    "phonon number {} above cutoff on site {i}",
                    phonons[i]
                )));
            }
            f += (downs[i] as u64 * self.levels[i] + phonons[i] as u64) * self.strides[i];
        }
        Ok(f)
    }

    /// Z₂ parity (−1)^{#↓ + Σn} of a full-space index.
    pub fn parity_of_full(&self, full: u64) -> i32 {
        let mut odd = 0;
        for i in 0..self.n_sites() {
            let d = self.digit(full, i);
            odd += (d >= self.levels[i]) as u64 + d % self.levels[i];
        }
        if odd % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Full index with the spin on `site` flipped.
    pub(crate) fn flip_full(&self, full: u64, site: usize) -> u64 {
        let jump = self.levels[site] * self.strides[site];
        if self.is_down_full(full, site) {
            full - jump
        } else {
            full + jump
        }
    }

    /// Spin register bits (bit N−1−i set when site i is ↓) and the
    /// combined phonon index, site 0 most significant.
    pub(crate) fn split_spin_phonon(&self, full: u64) -> (usize, usize) {
        let n = self.n_sites();
        let mut spins = 0usize;
        let mut ph = 0usize;
        for i in 0..n {
            let d = self.digit(full, i);
            spins = (spins << 1) | (d >= self.levels[i]) as usize;
            ph = ph * self.levels[i] as usize + (d % self.levels[i]) as usize;
        }
        (spins, ph)
    }

    pub(crate) fn phonon_space_dim(&self) -> usize {
        self.levels.iter().product::<u64>() as usize
    }
}
