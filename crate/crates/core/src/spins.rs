//! Classical spin configurations: one sigma = +/-1 per lattice site.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// A basis configuration in the sigma^3 eigenbasis, indexed like the lattice
/// sites (row-major, x1 fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        SpinConfiguration { spins }
    }

    pub fn all_up(n_sites: usize) -> Self {
        SpinConfiguration {
            spins: vec![1; n_sites],
        }
    }

    /// Classical Neel state: up on the even sublattice.
    pub fn neel(lat: &Lattice) -> Self {
        let spins = (0..lat.n_sites())
            .map(|s| lat.staggered_sign(s) as i8)
            .collect();
        SpinConfiguration { spins }
    }

    /// Uniform random configuration with total magnetization fixed to
    /// `sector` (in sigma units): a shuffle of the fixed up/down multiset.
    pub fn random_in_sector<R: Rng>(n_sites: usize, sector: i64, rng: &mut R) -> Result<Self> {
        let n = n_sites as i64;
        if sector.abs() > n || (sector + n) % 2 != 0 {
            return Err(Error::config(format!(
                "sector {sector} is infeasible on {n_sites} sites"
            )));
        }
        let n_up = ((sector + n) / 2) as usize;
        let mut spins = vec![-1i8; n_sites];
        spins[..n_up].fill(1);
        // Fisher-Yates.
        for i in (1..n_sites).rev() {
            let j = rng.random_range(0..=i);
            spins.swap(i, j);
        }
        Ok(SpinConfiguration { spins })
    }

    /// Uniform over all 2^n configurations.
    pub fn random_uniform<R: Rng>(n_sites: usize, rng: &mut R) -> Self {
        let spins = (0..n_sites)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        SpinConfiguration { spins }
    }

    /// Decode a Hilbert-space basis index: bit i set means site i is up.
    pub fn from_basis_index(n_sites: usize, index: usize) -> Self {
        let spins = (0..n_sites)
            .map(|i| if index >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        SpinConfiguration { spins }
    }

    pub fn to_basis_index(&self) -> usize {
        self.spins
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s > 0)
            .fold(0usize, |acc, (i, _)| acc | (1 << i))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    #[inline]
    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    #[inline]
    pub fn set(&mut self, site: usize, value: i8) {
        self.spins[site] = value;
    }

    #[inline]
    pub fn swap_sites(&mut self, a: usize, b: usize) {
        self.spins.swap(a, b);
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    /// Total magnetization in sigma units (an exactly conserved integer).
    pub fn total_sigma(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }
}
