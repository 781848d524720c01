//! `spindissim oracle`: exact small-lattice evolution and the
//! classical-reduction certificate.

use std::path::Path;

use serde::Serialize;

use spindissim_core::analysis::observables::{Convention, ObservableKind, ObservableSet};
use spindissim_core::analysis::series::{TimeSeries, TimeUnit};
use spindissim_core::error::{Error, Result};
use spindissim_core::lattice::{build_schedule, Lattice};
use spindissim_core::oracle::{
    self, classical_reduction_check, classical_reduction_check_lindblad, DiagonalObservable,
    OracleSeries, ThermalEnsemble,
};

use crate::commands::{ensure_dir, sanitize_name, write_json};
use crate::config::Config;

/// Contract bound on the quantum/classical deviation for diagonal
/// observables.
pub const REDUCTION_BOUND: f64 = 1e-10;

#[derive(Serialize)]
struct ReductionReport {
    l1: usize,
    l2: usize,
    beta_j: f64,
    rounds: usize,
    gamma: f64,
    grid_max: f64,
    bound: f64,
    discrete_max_deviation: Option<f64>,
    lindblad_max_deviation: f64,
    pass: bool,
    trajectory_check: Option<TrajectoryCheck>,
}

#[derive(Serialize)]
struct TrajectoryCheck {
    n_trajectories: usize,
    rounds: usize,
    worst_z: f64,
    pass: bool,
}

/// Build dense diagonal observables mirroring the engine's observable set.
fn diagonal_observables(lat: &Lattice, kinds: &[ObservableKind]) -> Vec<DiagonalObservable> {
    let set = ObservableSet::new(lat, kinds);
    let n = lat.n_sites();
    kinds
        .iter()
        .enumerate()
        .map(|(idx, kind)| {
            let set = set.clone();
            DiagonalObservable::from_fn(n, kind.name(), move |cfg| {
                let mut buf = Vec::new();
                set.evaluate_into(cfg, &mut buf);
                buf[idx]
            })
        })
        .collect()
}

fn write_oracle_series(
    series: &OracleSeries,
    time_unit: TimeUnit,
    prefix: &str,
    out_dir: &Path,
) -> Result<()> {
    for (o, name) in series.names.iter().enumerate() {
        let mut ts = TimeSeries::new(name.clone(), Convention::Sigma, time_unit);
        for (t_idx, &time) in series.times.iter().enumerate() {
            ts.push(time, series.values[o][t_idx], 0.0, 1);
        }
        ts.write_csv(&out_dir.join(format!("{prefix}_{}.csv", sanitize_name(name))))?;
    }
    Ok(())
}

pub fn run(config: &Config, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let section = &config.oracle;
    let lat = Lattice::rect(section.l1, section.l2)?;
    let kinds = config.observable_kinds()?;
    let observables = diagonal_observables(&lat, &kinds);
    let beta = config.run.beta_j;

    let h = oracle::build_hamiltonian(&lat, 1.0)?;
    let rho0 = oracle::thermal_density_matrix(&h, beta)?;

    // Discrete rounds need the four-step schedule (even or length-1 dims).
    let schedule = build_schedule(&lat).ok();
    let discrete_dev = match (&schedule, section.rounds) {
        (Some(schedule), rounds) if rounds > 0 => {
            let (series, _) = oracle::evolve_discrete(&rho0, &lat, schedule, rounds, &observables)?;
            write_oracle_series(&series, TimeUnit::Rounds, "oracle_discrete", out_dir)?;
            Some(classical_reduction_check(
                &rho0,
                &lat,
                schedule,
                rounds,
                &observables,
            )?)
        }
        _ => None,
    };

    let grid: Vec<f64> = (0..section.grid_points)
        .map(|i| section.grid_max * i as f64 / (section.grid_points - 1).max(1) as f64)
        .collect();
    let series = oracle::evolve_lindblad(&rho0, &lat, section.gamma, &grid, &observables)?;
    write_oracle_series(&series, TimeUnit::GammaT, "oracle_lindblad", out_dir)?;
    let lindblad_dev =
        classical_reduction_check_lindblad(&rho0, &lat, section.gamma, &grid, &observables)?;

    let trajectory_check = if section.trajectories > 0 {
        let schedule = schedule
            .as_ref()
            .ok_or_else(|| Error::config("trajectory check needs a valid schedule"))?;
        let rounds = section.rounds.max(1);
        let ensemble = ThermalEnsemble::new(&h, beta)?;
        let (means, errs) = oracle::trajectory_ensemble_mean(
            &ensemble,
            &lat,
            schedule,
            rounds,
            &observables,
            section.trajectories,
            config.run.seed,
        );
        let (channel, _) = oracle::evolve_discrete(&rho0, &lat, schedule, rounds, &observables)?;
        let mut worst_z = 0.0f64;
        for o in 0..observables.len() {
            for t in 0..=rounds {
                let err = errs[o][t].max(1e-12);
                worst_z = worst_z.max((means[o][t] - channel.values[o][t]).abs() / err);
            }
        }
        Some(TrajectoryCheck {
            n_trajectories: section.trajectories,
            rounds,
            worst_z,
            pass: worst_z <= 3.0,
        })
    } else {
        None
    };

    let pass = discrete_dev.map_or(true, |d| d <= REDUCTION_BOUND)
        && lindblad_dev <= REDUCTION_BOUND
        && trajectory_check.as_ref().map_or(true, |t| t.pass);
    let report = ReductionReport {
        l1: section.l1,
        l2: section.l2,
        beta_j: beta,
        rounds: section.rounds,
        gamma: section.gamma,
        grid_max: section.grid_max,
        bound: REDUCTION_BOUND,
        discrete_max_deviation: discrete_dev,
        lindblad_max_deviation: lindblad_dev,
        pass,
        trajectory_check,
    };
    write_json(&out_dir.join("reduction_check.json"), &report)?;
    println!(
        "oracle: {}x{} betaJ={} -> reduction deviation discrete={:?} lindblad={:.3e} (bound {:.0e})",
        section.l1, section.l2, beta, discrete_dev, lindblad_dev, REDUCTION_BOUND
    );
    if !pass {
        return Err(Error::invariant(
            "classical reduction deviates beyond the contract bound",
        ));
    }
    Ok(())
}
