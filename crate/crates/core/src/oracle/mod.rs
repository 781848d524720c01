//! Brute-force quantum evolution for small lattices: exact thermal states,
//! exact channel and Lindblad evolution, Born-rule trajectory sampling, and
//! the authoritative check that the classical swap process reproduces the
//! quantum dynamics for diagonal observables.
//!
//! Everything here is dense and capped at [`crate::channel::ORACLE_SITE_CAP`]
//! sites. Basis convention: bit `i` of a basis index set means site `i` is
//! spin up.

mod classical;
mod lindblad;
mod trajectory;

pub use classical::{
    classical_evolve_discrete, classical_evolve_lindblad, classical_reduction_check,
    classical_reduction_check_lindblad, classical_step_matrix, sector_uniform_projection,
};
pub use lindblad::{evolve_lindblad, evolve_lindblad_integrated, LINDBLAD_LOCAL_TOL};
pub use trajectory::{trajectory_ensemble_mean, trajectory_sample, ThermalEnsemble, Trajectory};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{self, ORACLE_SITE_CAP};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, SweepSchedule};
use crate::spins::SpinConfiguration;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = -1e-10;

/// Dense Hermitian unit-trace state of up to [`ORACLE_SITE_CAP`] spins.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n_sites: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity and unit trace.
    pub fn new(n_sites: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_site_cap(n_sites)?;
        let dim = 1usize << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::invariant(format!(
                "density matrix dimension {} does not match {} sites",
                matrix.nrows(),
                n_sites
            )));
        }
        let rho = DensityMatrix { n_sites, matrix };
        rho.check_hermitian_unit_trace()?;
        Ok(rho)
    }

    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        check_site_cap(n_sites)?;
        let dim = 1usize << n_sites;
        let m = DMatrix::<Complex64>::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        Ok(DensityMatrix { n_sites, matrix: m })
    }

    /// Pure basis state |s><s|.
    pub fn pure_basis(n_sites: usize, basis_index: usize) -> Result<Self> {
        check_site_cap(n_sites)?;
        let dim = 1usize << n_sites;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        m[(basis_index, basis_index)] = Complex64::ONE;
        Ok(DensityMatrix { n_sites, matrix: m })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Real diagonal of the state: the Born probabilities of the basis
    /// configurations.
    pub fn diagonal_probabilities(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.matrix[(i, i)].re))
    }

    fn check_hermitian_unit_trace(&self) -> Result<()> {
        let dim = self.dim();
        for i in 0..dim {
            for j in i..dim {
                let diff = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                if diff > HERMITICITY_TOL {
                    return Err(Error::invariant(format!(
                        "density matrix not Hermitian: |rho[{i},{j}] - rho[{j},{i}]*| = {diff:e}"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::invariant(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        Ok(())
    }

    /// Full validation including spectral positivity; used in tests and at
    /// module boundaries, not in inner loops.
    pub fn validate_positive(&self) -> Result<()> {
        self.check_hermitian_unit_trace()?;
        // Hermitian with real entries dominating: diagonalize the real part
        // plus the imaginary part folded into a doubled real matrix would be
        // overkill; nalgebra handles complex Hermitian directly.
        let eig = self.matrix.clone().symmetric_eigenvalues();
        if eig.iter().any(|&e| e < POSITIVITY_TOL) {
            return Err(Error::invariant(
                "density matrix has a significantly negative eigenvalue",
            ));
        }
        Ok(())
    }
}

fn check_site_cap(n_sites: usize) -> Result<()> {
    if n_sites == 0 {
        return Err(Error::config("need at least one site"));
    }
    if n_sites > ORACLE_SITE_CAP {
        return Err(Error::size(format!(
            "exact oracle capped at {ORACLE_SITE_CAP} sites, got {n_sites}"
        )));
    }
    Ok(())
}

/// Heisenberg Hamiltonian `H = J sum_<xy> S_x . S_y` as a dense real
/// symmetric matrix (spin operators are sigma/2).
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n_sites: usize,
    coupling: f64,
    matrix: DMatrix<f64>,
}

/// The two-site exchange operator S.S in the pair basis (uu, ud, du, dd).
pub const EXCHANGE_PAIR: [[f64; 4]; 4] = [
    [0.25, 0.0, 0.0, 0.0],
    [0.0, -0.25, 0.5, 0.0],
    [0.0, 0.5, -0.25, 0.0],
    [0.0, 0.0, 0.0, 0.25],
];

pub fn build_hamiltonian(lat: &Lattice, coupling: f64) -> Result<Hamiltonian> {
    let n = lat.n_sites();
    check_site_cap(n)?;
    let dim = 1usize << n;
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    for bond in lat.bonds() {
        matrix += channel::embed_pair_operator(dim, bond.a, bond.b, &EXCHANGE_PAIR);
    }
    matrix *= coupling;
    Ok(Hamiltonian {
        n_sites: n,
        coupling,
        matrix,
    })
}

impl Hamiltonian {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigendecomposition, ascending eigenvalues.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), order.len());
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        (values, vectors)
    }
}

/// `exp(-beta H)/Z` via eigendecomposition.
pub fn thermal_density_matrix(h: &Hamiltonian, beta: f64) -> Result<DensityMatrix> {
    if beta < 0.0 {
        return Err(Error::config("inverse temperature must be non-negative"));
    }
    let (evals, evecs) = h.eigen();
    let e0 = evals[0];
    let weights: Vec<f64> = evals.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let dim = h.dim();
    let mut rho = DMatrix::<f64>::zeros(dim, dim);
    for (k, &w) in weights.iter().enumerate() {
        let v = evecs.column(k);
        // rho += (w/z) |v><v|
        let scale = w / z;
        for i in 0..dim {
            let vi = v[i] * scale;
            if vi == 0.0 {
                continue;
            }
            for j in 0..dim {
                rho[(i, j)] += vi * v[j];
            }
        }
    }
    DensityMatrix::new(h.n_sites, rho.map(|x| Complex64::new(x, 0.0)))
}

/// A diagonal observable in the sigma^3 basis: one value per basis state.
#[derive(Debug, Clone)]
pub struct DiagonalObservable {
    pub name: String,
    pub values: DVector<f64>,
}

impl DiagonalObservable {
    pub fn from_fn(
        n_sites: usize,
        name: impl Into<String>,
        f: impl Fn(&SpinConfiguration) -> f64,
    ) -> Self {
        let dim = 1usize << n_sites;
        let values = DVector::from_iterator(
            dim,
            (0..dim).map(|idx| f(&SpinConfiguration::from_basis_index(n_sites, idx))),
        );
        DiagonalObservable {
            name: name.into(),
            values,
        }
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        (0..rho.dim())
            .map(|i| self.values[i] * rho.matrix()[(i, i)].re)
            .sum()
    }

    pub fn expectation_probs(&self, probs: &DVector<f64>) -> f64 {
        self.values.dot(probs)
    }

    pub fn expectation_state(&self, psi: &DVector<f64>) -> f64 {
        psi.iter()
            .enumerate()
            .map(|(i, &a)| self.values[i] * a * a)
            .sum()
    }
}

/// One sweep step: the outcome-summed channel applied on every bond of a
/// matching. Bonds in a matching act on disjoint sites, so they commute and
/// the application order is irrelevant.
pub fn apply_sweep_step(
    rho: &DensityMatrix,
    lat: &Lattice,
    step_bonds: &[usize],
) -> Result<DensityMatrix> {
    let mut covered = vec![false; lat.n_sites()];
    for &id in step_bonds {
        let bond = lat.bond(id);
        if covered[bond.a] || covered[bond.b] {
            return Err(Error::config(
                "sweep step bonds must form a matching (commuting channels)",
            ));
        }
        covered[bond.a] = true;
        covered[bond.b] = true;
    }
    let mut m = rho.matrix().clone();
    for &id in step_bonds {
        let bond = lat.bond(id);
        m = channel::apply_pair_channel(&m, bond.a, bond.b);
    }
    DensityMatrix::new(rho.n_sites(), m)
}

/// Expectation values recorded on a time grid; exact (no statistical error).
#[derive(Debug, Clone)]
pub struct OracleSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[obs][time_index]`
    pub values: Vec<Vec<f64>>,
}

impl OracleSeries {
    fn new(names: &[String]) -> Self {
        OracleSeries {
            times: Vec::new(),
            names: names.to_vec(),
            values: vec![Vec::new(); names.len()],
        }
    }

    fn record(&mut self, time: f64, row: impl Iterator<Item = f64>) {
        self.times.push(time);
        for (col, v) in row.enumerate() {
            self.values[col].push(v);
        }
    }
}

/// Channel evolution over `rounds` full rounds (4 steps each), recording
/// observables after every round (and at t = 0).
pub fn evolve_discrete(
    rho0: &DensityMatrix,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    observables: &[DiagonalObservable],
) -> Result<(OracleSeries, DensityMatrix)> {
    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    let mut series = OracleSeries::new(&names);
    let mut rho = rho0.clone();
    series.record(0.0, observables.iter().map(|o| o.expectation(&rho)));
    for round in 1..=rounds {
        for step in schedule.steps() {
            rho = apply_sweep_step(&rho, lat, step)?;
        }
        series.record(
            round as f64,
            observables.iter().map(|o| o.expectation(&rho)),
        );
    }
    Ok((series, rho))
}

/// Total magnetization of a basis index, in sigma units.
pub fn basis_sector(n_sites: usize, index: usize) -> i64 {
    let ups = (index & ((1usize << n_sites) - 1)).count_ones() as i64;
    2 * ups - n_sites as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_schedule;
    use approx::assert_relative_eq;

    #[test]
    fn two_site_spectrum_is_singlet_triplet() {
        let lat = Lattice::single_pair();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let (evals, _) = h.eigen();
        assert_relative_eq!(evals[0], -0.75, epsilon = 1e-12);
        for k in 1..4 {
            assert_relative_eq!(evals[k], 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn hamiltonian_commutes_with_total_sz() {
        let lat = Lattice::rect(4, 1).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        // Block structure: H[s,s'] = 0 whenever the sectors differ.
        let dim = h.dim();
        for s in 0..dim {
            for sp in 0..dim {
                if basis_sector(4, s) != basis_sector(4, sp) {
                    assert_eq!(h.matrix()[(s, sp)], 0.0);
                }
            }
        }
    }

    #[test]
    fn square_2x2_ground_state_is_total_singlet() {
        let lat = Lattice::square(2).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let (evals, evecs) = h.eigen();
        // S_tot^2 = sum_ij S_i . S_j = (3N/4) I + 2 sum_{i<j} S_i . S_j.
        let n = lat.n_sites();
        let dim = h.dim();
        let mut s_tot = DMatrix::<f64>::identity(dim, dim) * (0.75 * n as f64);
        for i in 0..n {
            for j in (i + 1)..n {
                s_tot += 2.0 * channel::embed_pair_operator(dim, i, j, &EXCHANGE_PAIR);
            }
        }
        let ground = evecs.column(0);
        let s2 = (ground.transpose() * &s_tot * ground)[(0, 0)];
        assert!(s2.abs() < 1e-10, "ground state S_tot^2 = {s2}");
        // Non-degenerate singlet below the rest of the spectrum.
        assert!(evals[1] - evals[0] > 1e-6);
    }

    #[test]
    fn thermal_limits() {
        let lat = Lattice::single_pair();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let hot = thermal_density_matrix(&h, 0.0).unwrap();
        for i in 0..4 {
            assert_relative_eq!(hot.matrix()[(i, i)].re, 0.25, epsilon = 1e-12);
        }
        // Large beta: singlet projector (|ud> - |du>)/sqrt(2).
        let cold = thermal_density_matrix(&h, 200.0).unwrap();
        assert_relative_eq!(cold.matrix()[(1, 1)].re, 0.5, epsilon = 1e-9);
        assert_relative_eq!(cold.matrix()[(2, 2)].re, 0.5, epsilon = 1e-9);
        assert_relative_eq!(cold.matrix()[(1, 2)].re, -0.5, epsilon = 1e-9);
        cold.validate_positive().unwrap();
    }

    #[test]
    fn sweep_step_preserves_parallel_state_and_mixes_antiparallel() {
        let lat = Lattice::single_pair();
        // |ud> has basis index 0b01 = 1 (site 0 up).
        let rho = DensityMatrix::pure_basis(2, 1).unwrap();
        let out = apply_sweep_step(&rho, &lat, &[0]).unwrap();
        assert_relative_eq!(out.matrix()[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(out.matrix()[(2, 2)].re, 0.5, epsilon = 1e-14);

        let up = DensityMatrix::pure_basis(2, 0b11).unwrap();
        let out = apply_sweep_step(&up, &lat, &[0]).unwrap();
        assert_relative_eq!(out.matrix()[(3, 3)].re, 1.0, epsilon = 1e-14);

        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let out = apply_sweep_step(&mixed, &lat, &[0]).unwrap();
        for i in 0..4 {
            assert_relative_eq!(out.matrix()[(i, i)].re, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn sweep_step_rejects_non_matching() {
        let lat = Lattice::square(2).unwrap();
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        // Two bonds sharing a site.
        let shared: Vec<usize> = {
            let b0 = lat.bond(0);
            (1..lat.n_bonds())
                .find(|&id| {
                    let b = lat.bond(id);
                    b.a == b0.a || b.b == b0.a || b.a == b0.b || b.b == b0.b
                })
                .map(|id| vec![0, id])
                .unwrap()
        };
        assert!(apply_sweep_step(&rho, &lat, &shared).is_err());
    }

    #[test]
    fn discrete_evolution_conserves_total_sigma_and_approaches_sector_average() {
        let lat = Lattice::square(2).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho0 = thermal_density_matrix(&h, 1.0).unwrap();
        let n = lat.n_sites();
        let total_sigma = DiagonalObservable::from_fn(n, "stot", |c| c.total_sigma() as f64);
        let lat2 = lat.clone();
        let ms2 = DiagonalObservable::from_fn(n, "ms2", move |c| {
            let m: i64 = (0..n)
                .map(|s| lat2.staggered_sign(s) * c.get(s) as i64)
                .sum();
            (m * m) as f64
        });
        let (series, rho_end) =
            evolve_discrete(&rho0, &lat, &schedule, 60, &[total_sigma, ms2]).unwrap();
        let first = series.values[0][0];
        for &v in &series.values[0] {
            assert_relative_eq!(v, first, epsilon = 1e-12);
        }
        // Approach to the sector-uniform stationary value is monotone in the
        // distance to the limit (the raw value can overshoot once).
        let p_inf = sector_uniform_projection(&rho0.diagonal_probabilities(), n);
        let ms2_vals = &series.values[1];
        let target = {
            let lat3 = lat.clone();
            let obs = DiagonalObservable::from_fn(n, "ms2", move |c| {
                let m: i64 = (0..n)
                    .map(|s| lat3.staggered_sign(s) * c.get(s) as i64)
                    .sum();
                (m * m) as f64
            });
            obs.expectation_probs(&p_inf)
        };
        assert_relative_eq!(*ms2_vals.last().unwrap(), target, epsilon = 1e-9);
        for w in ms2_vals.windows(2) {
            assert!((w[1] - target).abs() <= (w[0] - target).abs() + 1e-12);
        }
        rho_end.validate_positive().unwrap();
    }
}
