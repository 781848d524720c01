//! Outcome-resolved Born-rule trajectories through the measurement schedule.
//!
//! The initial state is drawn from the eigenensemble of a density matrix;
//! every measured bond then projects onto total spin 0 or 1 with Born
//! probability, renormalizing the state. Averages over trajectories estimate
//! the outcome-summed channel evolution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::{apply_pair_to_vector, projectors};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, SweepSchedule};
use crate::rngstream::stream_rng;

use super::{DiagonalObservable, Hamiltonian};

/// Spectral ensemble {p_i, |i>} of a thermal state. Eigenvectors of the real
/// symmetric Hamiltonian are real.
#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    cumulative: Vec<f64>,
    states: DMatrix<f64>,
}

impl ThermalEnsemble {
    pub fn new(h: &Hamiltonian, beta: f64) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::config("inverse temperature must be non-negative"));
        }
        let (evals, evecs) = h.eigen();
        let e0 = evals[0];
        let weights: Vec<f64> = evals.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / z;
            cumulative.push(acc);
        }
        Ok(ThermalEnsemble {
            cumulative,
            states: evecs,
        })
    }

    /// Single pure basis state ensemble (for deterministic starts).
    pub fn pure_basis(n_sites: usize, basis_index: usize) -> Self {
        let dim = 1usize << n_sites;
        let mut states = DMatrix::zeros(dim, 1);
        states[(basis_index, 0)] = 1.0;
        ThermalEnsemble {
            cumulative: vec![1.0],
            states,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let k = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.cumulative.len() - 1);
        self.states.column(k).into_owned()
    }
}

/// One sampled trajectory: the outcome record (one bit per measured bond, in
/// schedule order), per-round observable records, and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub outcomes: Vec<u8>,
    /// `records[obs][round]`, round 0 = initial state.
    pub records: Vec<Vec<f64>>,
    pub final_state: DVector<f64>,
}

pub fn trajectory_sample<R: Rng>(
    ensemble: &ThermalEnsemble,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    observables: &[DiagonalObservable],
    rng: &mut R,
) -> Trajectory {
    let (p0, p1) = projectors();
    let p0 = p0.to_f64();
    let p1 = p1.to_f64();
    let mut psi = ensemble.draw(rng);
    let mut outcomes = Vec::with_capacity(4 * rounds * lat.n_sites() / 2);
    let mut records: Vec<Vec<f64>> = observables
        .iter()
        .map(|o| vec![o.expectation_state(&psi)])
        .collect();
    for _ in 0..rounds {
        for bond_id in schedule.round_bonds() {
            let bond = lat.bond(bond_id);
            // Born probability of outcome 0 on this bond.
            let mut proj0 = psi.clone();
            apply_pair_to_vector(&mut proj0, bond.a, bond.b, &p0);
            let q0 = proj0.norm_squared().clamp(0.0, 1.0);
            if rng.random::<f64>() < q0 {
                outcomes.push(0);
                psi = proj0 / q0.sqrt();
            } else {
                outcomes.push(1);
                apply_pair_to_vector(&mut psi, bond.a, bond.b, &p1);
                let q1 = (1.0 - q0).max(f64::MIN_POSITIVE);
                psi /= q1.sqrt();
            }
            // Guard against slow norm drift over long records.
            let n2 = psi.norm_squared();
            if (n2 - 1.0).abs() > 1e-9 {
                psi /= n2.sqrt();
            }
        }
        for (rec, o) in records.iter_mut().zip(observables) {
            rec.push(o.expectation_state(&psi));
        }
    }
    Trajectory {
        outcomes,
        records,
        final_state: psi,
    }
}

/// Mean and standard error of the observables over `n_trajectories`
/// independent trajectories, per round. Deterministic for a given seed
/// regardless of thread count.
pub fn trajectory_ensemble_mean(
    ensemble: &ThermalEnsemble,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    observables: &[DiagonalObservable],
    n_trajectories: usize,
    master_seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let run = |traj_id: u64| {
        let mut rng = stream_rng(master_seed, traj_id, "oracle-trajectory");
        trajectory_sample(ensemble, lat, schedule, rounds, observables, &mut rng).records
    };

    let n_obs = observables.len();
    let n_times = rounds + 1;
    let mut sum = vec![vec![0.0f64; n_times]; n_obs];
    let mut sum_sq = vec![vec![0.0f64; n_times]; n_obs];

    let mut fold = |records: Vec<Vec<f64>>| {
        for (o, rec) in records.into_iter().enumerate() {
            for (t, v) in rec.into_iter().enumerate() {
                sum[o][t] += v;
                sum_sq[o][t] += v * v;
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let all: Vec<Vec<Vec<f64>>> = (0..n_trajectories as u64)
            .into_par_iter()
            .map(run)
            .collect();
        for records in all {
            fold(records);
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        for traj_id in 0..n_trajectories as u64 {
            fold(run(traj_id));
        }
    }

    let n = n_trajectories as f64;
    let mut means = vec![vec![0.0f64; n_times]; n_obs];
    let mut errs = vec![vec![0.0f64; n_times]; n_obs];
    for o in 0..n_obs {
        for t in 0..n_times {
            let mean = sum[o][t] / n;
            let var = (sum_sq[o][t] / n - mean * mean).max(0.0);
            means[o][t] = mean;
            errs[o][t] = (var / (n - 1.0).max(1.0)).sqrt();
        }
    }
    (means, errs)
}
