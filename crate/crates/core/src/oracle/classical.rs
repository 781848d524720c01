//! Exact classical side of the reduction theorem: the swap-1/2 transfer
//! matrix acting on diagonal probability vectors, and the comparison against
//! the quantum channel evolution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::channel::classical_kernel;
use crate::error::Result;
use crate::lattice::{Lattice, SweepSchedule};

use super::{
    basis_sector, evolve_discrete, lindblad::evolve_lindblad, DensityMatrix, DiagonalObservable,
    OracleSeries,
};

/// Apply the classical pair kernel on one bond to a probability vector:
/// antiparallel pairs split their mass half-and-half with the swapped state.
fn apply_kernel_bond(p: &DVector<f64>, site_a: usize, site_b: usize) -> DVector<f64> {
    let dim = p.len();
    let ba = 1usize << site_a;
    let bb = 1usize << site_b;
    let mut out = DVector::zeros(dim);
    for s in 0..dim {
        let mass = p[s];
        if mass == 0.0 {
            continue;
        }
        let a_up = s & ba != 0;
        let b_up = s & bb != 0;
        if a_up == b_up {
            out[s] += mass;
        } else {
            out[s] += 0.5 * mass;
            out[s ^ ba ^ bb] += 0.5 * mass;
        }
    }
    out
}

/// Classical analogue of the discrete channel evolution: the transfer matrix
/// of one round applied to `diag(rho0)`, recording the same observables.
pub fn classical_evolve_discrete(
    p0: &DVector<f64>,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    observables: &[DiagonalObservable],
) -> OracleSeries {
    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    let mut series = OracleSeries::new(&names);
    let mut p = p0.clone();
    series.record(0.0, observables.iter().map(|o| o.expectation_probs(&p)));
    for round in 1..=rounds {
        for bond_id in schedule.round_bonds() {
            let bond = lat.bond(bond_id);
            p = apply_kernel_bond(&p, bond.a, bond.b);
        }
        series.record(
            round as f64,
            observables.iter().map(|o| o.expectation_probs(&p)),
        );
    }
    series
}

/// Dense (2^n x 2^n) transition matrix of a single bond-kernel application.
/// Symmetric: the swap kernel is doubly stochastic.
pub fn classical_step_matrix(lat: &Lattice, bond_id: usize) -> DMatrix<f64> {
    let bond = lat.bond(bond_id);
    let dim = 1usize << lat.n_sites();
    let kernel = classical_kernel();
    let _ = kernel; // construction runs the exact derivation check
    let mut m = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let basis = DVector::from_fn(dim, |i, _| if i == s { 1.0 } else { 0.0 });
        let col = apply_kernel_bond(&basis, bond.a, bond.b);
        m.set_column(s, &col);
    }
    m
}

/// Classical master equation `dp/dt = gamma sum_b (K_b - I) p`, solved by
/// exact exponentiation of the (symmetric) generator.
pub fn classical_evolve_lindblad(
    p0: &DVector<f64>,
    lat: &Lattice,
    gamma: f64,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> OracleSeries {
    let dim = p0.len();
    let mut gen = DMatrix::<f64>::zeros(dim, dim);
    for bond in lat.bonds() {
        for s in 0..dim {
            let ba = 1usize << bond.a;
            let bb = 1usize << bond.b;
            let a_up = s & ba != 0;
            let b_up = s & bb != 0;
            if a_up != b_up {
                gen[(s, s)] -= 0.5;
                gen[(s ^ ba ^ bb, s)] += 0.5;
            }
        }
    }
    gen *= gamma;
    let eig = SymmetricEigen::new(gen);
    let coeff = eig.eigenvectors.transpose() * p0;
    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    let mut series = OracleSeries::new(&names);
    for &t in grid {
        let scaled = DVector::from_iterator(
            dim,
            coeff
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(&c, &l)| c * (t * l).exp()),
        );
        let p = &eig.eigenvectors * scaled;
        series.record(t, observables.iter().map(|o| o.expectation_probs(&p)));
    }
    series
}

/// Project a probability vector onto the stationary manifold of the swap
/// process: uniform within each total-magnetization sector.
pub fn sector_uniform_projection(p: &DVector<f64>, n_sites: usize) -> DVector<f64> {
    let dim = p.len();
    let n_sectors = n_sites + 1;
    let mut mass = vec![0.0; n_sectors];
    let mut count = vec![0usize; n_sectors];
    let sector_slot = |s: usize| ((basis_sector(n_sites, s) + n_sites as i64) / 2) as usize;
    for s in 0..dim {
        mass[sector_slot(s)] += p[s];
        count[sector_slot(s)] += 1;
    }
    DVector::from_fn(dim, |s, _| {
        let k = sector_slot(s);
        mass[k] / count[k] as f64
    })
}

/// Runs quantum channel evolution and the classical transfer evolution side
/// by side over `rounds` rounds, returning the maximum absolute deviation of
/// any observable at any recorded time. The observables must be diagonal.
pub fn classical_reduction_check(
    rho0: &DensityMatrix,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    observables: &[DiagonalObservable],
) -> Result<f64> {
    let (quantum, _) = evolve_discrete(rho0, lat, schedule, rounds, observables)?;
    let classical = classical_evolve_discrete(
        &rho0.diagonal_probabilities(),
        lat,
        schedule,
        rounds,
        observables,
    );
    Ok(max_deviation(&quantum, &classical))
}

/// Same comparison for the continuous-time process on a gamma*t grid.
pub fn classical_reduction_check_lindblad(
    rho0: &DensityMatrix,
    lat: &Lattice,
    gamma: f64,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> Result<f64> {
    let quantum = evolve_lindblad(rho0, lat, gamma, grid, observables)?;
    let classical = classical_evolve_lindblad(
        &rho0.diagonal_probabilities(),
        lat,
        gamma,
        grid,
        observables,
    );
    Ok(max_deviation(&quantum, &classical))
}

fn max_deviation(a: &OracleSeries, b: &OracleSeries) -> f64 {
    let mut max = 0.0f64;
    for (col_a, col_b) in a.values.iter().zip(&b.values) {
        for (&va, &vb) in col_a.iter().zip(col_b) {
            max = max.max((va - vb).abs());
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_schedule;
    use crate::oracle::{build_hamiltonian, thermal_density_matrix};
    use approx::assert_relative_eq;

    #[test]
    fn kernel_bond_application_is_stochastic_and_symmetric() {
        let lat = Lattice::square(2).unwrap();
        let m = classical_step_matrix(&lat, 3);
        let dim = m.nrows();
        for s in 0..dim {
            let col_sum: f64 = (0..dim).map(|r| m[(r, s)]).sum();
            assert_relative_eq!(col_sum, 1.0, epsilon = 1e-15);
        }
        assert_eq!(m.transpose(), m);
    }

    #[test]
    fn sector_projection_preserves_mass_and_is_idempotent() {
        let lat = Lattice::square(2).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho = thermal_density_matrix(&h, 0.8).unwrap();
        let p = rho.diagonal_probabilities();
        let proj = sector_uniform_projection(&p, 4);
        assert_relative_eq!(proj.sum(), 1.0, epsilon = 1e-12);
        let twice = sector_uniform_projection(&proj, 4);
        assert_relative_eq!((proj - twice).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn reduction_check_on_chain_structure_factor() {
        // 4-site chain, betaJ = 2, |S~(pi/2)|^2 over 20 rounds.
        let lat = Lattice::rect(4, 1).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho0 = thermal_density_matrix(&h, 2.0).unwrap();
        let momentum = crate::lattice::Momentum::from_indices(&lat, 1, 0);
        let latc = lat.clone();
        let sf = DiagonalObservable::from_fn(4, "sf", move |c| {
            crate::analysis::observables::structure_factor(
                &latc,
                c,
                &momentum,
                crate::analysis::observables::Convention::Sigma,
            )
        });
        let dev = classical_reduction_check(&rho0, &lat, &schedule, 20, &[sf]).unwrap();
        assert!(dev <= 1e-10, "deviation {dev:e}");
    }

    #[test]
    fn reduction_check_on_conserved_charge_is_exact() {
        let lat = Lattice::square(2).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho0 = thermal_density_matrix(&h, 1.0).unwrap();
        let stot = DiagonalObservable::from_fn(4, "stot", |c| c.total_sigma() as f64);
        let dev = classical_reduction_check(&rho0, &lat, &schedule, 10, &[stot]).unwrap();
        // Both sides are constant in exact arithmetic; only rounding remains.
        assert!(dev <= 1e-13, "deviation {dev:e}");
    }

    #[test]
    fn reduction_check_on_2x2_thermal() {
        let lat = Lattice::square(2).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho0 = thermal_density_matrix(&h, 1.0).unwrap();
        let n = lat.n_sites();
        let lat_for_obs = lat.clone();
        let ms2 = DiagonalObservable::from_fn(n, "ms2", move |c| {
            let m: i64 = (0..n)
                .map(|s| lat_for_obs.staggered_sign(s) * c.get(s) as i64)
                .sum();
            (m * m) as f64
        });
        let dev = classical_reduction_check(&rho0, &lat, &schedule, 10, &[ms2]).unwrap();
        assert!(dev <= 1e-10, "deviation {dev:e}");
    }
}
