//! Production-scale real-time dynamics: classical spin configurations
//! evolved under the measurement process, either in discrete four-step
//! rounds or as a continuous-time Poisson process, over ensembles of
//! independent replicas.
//!
//! Correctness for the diagonal observables rests on the pair-channel
//! reduction: the outcome-summed quantum channel acts on sigma^3-diagonal
//! states exactly as the swap-1/2 kernel. The exact oracle enforces this by
//! test; here the kernel is hard-wired as "antiparallel pairs swap with
//! probability 1/2".

use rand::Rng;

use crate::analysis::observables::ObservableSet;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, SweepSchedule};
use crate::rngstream::stream_rng;
use crate::spins::SpinConfiguration;

/// How a trajectory advances in time.
#[derive(Debug, Clone, PartialEq)]
pub enum EvolutionMode {
    /// Four-step rounds; time is measured in rounds (one round = 4 steps =
    /// one measurement of every bond).
    Discrete { rounds: usize, record_every: usize },
    /// Poisson measurement events at rate gamma per bond; observables are
    /// sampled on the given gamma*t grid (must start at >= 0, sorted).
    Continuous { gamma: f64, grid: Vec<f64> },
}

impl EvolutionMode {
    pub fn record_times(&self) -> Vec<f64> {
        match self {
            EvolutionMode::Discrete {
                rounds,
                record_every,
            } => {
                let every = (*record_every).max(1);
                let mut times: Vec<f64> = (0..=*rounds)
                    .filter(|r| r % every == 0 || r == rounds)
                    .map(|r| r as f64)
                    .collect();
                times.dedup();
                times
            }
            EvolutionMode::Continuous { grid, .. } => grid.clone(),
        }
    }
}

/// Per-replica record: observable values on the record-time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `values[obs][time_index]`
    pub values: Vec<Vec<f64>>,
    pub initial_sigma: i64,
}

/// One discrete trajectory, mutating `cfg` in place. Total sigma is checked
/// for exact integer constancy at every record point.
pub fn evolve_discrete<R: Rng>(
    cfg: &mut SpinConfiguration,
    lat: &Lattice,
    schedule: &SweepSchedule,
    rounds: usize,
    record_every: usize,
    observables: &ObservableSet,
    rng: &mut R,
) -> Result<Trajectory> {
    if cfg.len() != lat.n_sites() {
        return Err(Error::config("configuration does not match lattice size"));
    }
    let initial_sigma = cfg.total_sigma();
    let every = record_every.max(1);
    let mut traj = Trajectory {
        times: Vec::new(),
        values: vec![Vec::new(); observables.len()],
        initial_sigma,
    };
    let mut buf = Vec::with_capacity(observables.len());
    record(cfg, observables, 0.0, initial_sigma, &mut traj, &mut buf)?;
    for round in 1..=rounds {
        for step in schedule.steps() {
            for &bond_id in step {
                let bond = lat.bond(bond_id);
                measure_bond(cfg, bond.a, bond.b, rng);
            }
        }
        if round % every == 0 || round == rounds {
            record(
                cfg,
                observables,
                round as f64,
                initial_sigma,
                &mut traj,
                &mut buf,
            )?;
        }
    }
    Ok(traj)
}

/// One continuous trajectory: a global Poisson clock at rate
/// `n_bonds * gamma` with uniformly chosen bonds, O(1) per event.
pub fn evolve_continuous<R: Rng>(
    cfg: &mut SpinConfiguration,
    lat: &Lattice,
    gamma: f64,
    grid: &[f64],
    observables: &ObservableSet,
    rng: &mut R,
) -> Result<Trajectory> {
    if cfg.len() != lat.n_sites() {
        return Err(Error::config("configuration does not match lattice size"));
    }
    if gamma <= 0.0 {
        return Err(Error::config("gamma must be positive"));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("time grid must be non-negative and sorted"));
    }
    let initial_sigma = cfg.total_sigma();
    let mut traj = Trajectory {
        times: Vec::new(),
        values: vec![Vec::new(); observables.len()],
        initial_sigma,
    };
    let mut buf = Vec::with_capacity(observables.len());
    let total_rate = gamma * lat.n_bonds() as f64;
    let mut t = 0.0f64;
    let mut t_next = t + exponential_gap(total_rate, rng);
    for &target in grid {
        while t_next <= target {
            t = t_next;
            let bond = lat.bond(rng.random_range(0..lat.n_bonds()));
            measure_bond(cfg, bond.a, bond.b, rng);
            t_next = t + exponential_gap(total_rate, rng);
        }
        record(cfg, observables, target, initial_sigma, &mut traj, &mut buf)?;
    }
    Ok(traj)
}

#[inline]
fn exponential_gap<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    // Inverse CDF on (0, 1]; rand's open01-style draw avoids ln(0).
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// The classical pair kernel: antiparallel spins swap with probability 1/2.
#[inline]
fn measure_bond<R: Rng>(cfg: &mut SpinConfiguration, a: usize, b: usize, rng: &mut R) {
    if cfg.get(a) != cfg.get(b) && rng.random::<bool>() {
        cfg.swap_sites(a, b);
    }
}

fn record(
    cfg: &SpinConfiguration,
    observables: &ObservableSet,
    time: f64,
    initial_sigma: i64,
    traj: &mut Trajectory,
    buf: &mut Vec<f64>,
) -> Result<()> {
    if cfg.total_sigma() != initial_sigma {
        return Err(Error::invariant(format!(
            "total sigma drifted from {initial_sigma} to {} at t={time}",
            cfg.total_sigma()
        )));
    }
    observables.evaluate_into(cfg, buf);
    traj.times.push(time);
    for (col, &v) in buf.iter().enumerate() {
        traj.values[col].push(v);
    }
    Ok(())
}

/// Ordered (time, bond) measurement events; exposed for statistical tests of
/// the Poisson process the engine realizes inline.
#[derive(Debug, Clone)]
pub struct EventStream {
    pub events: Vec<(f64, usize)>,
}

pub fn sample_event_stream<R: Rng>(
    lat: &Lattice,
    gamma: f64,
    t_max: f64,
    rng: &mut R,
) -> EventStream {
    let total_rate = gamma * lat.n_bonds() as f64;
    let mut events = Vec::new();
    let mut t = exponential_gap(total_rate, rng);
    while t <= t_max {
        events.push((t, rng.random_range(0..lat.n_bonds())));
        t += exponential_gap(total_rate, rng);
    }
    EventStream { events }
}

/// Direct samples from the stationary distribution: uniform configurations
/// within a fixed total-sigma sector.
pub fn steady_state_sample<R: Rng>(
    lat: &Lattice,
    sector: i64,
    rng: &mut R,
    n_samples: usize,
) -> Result<Vec<SpinConfiguration>> {
    (0..n_samples)
        .map(|_| SpinConfiguration::random_in_sector(lat.n_sites(), sector, rng))
        .collect()
}

/// Where replicas start.
#[derive(Debug, Clone)]
pub enum InitialEnsemble {
    /// Every replica starts from the same configuration.
    Fixed(SpinConfiguration),
    /// Replica r starts from `pool[r % pool.len()]`.
    Pool(Vec<SpinConfiguration>),
    /// Uniform random configuration in a fixed total-sigma sector.
    Sector(i64),
    /// Uniform over all configurations (infinite temperature).
    Uniform,
}

/// An ensemble run specification. Replicas are independent; replica `r`
/// derives its RNG stream from `(master_seed, r, "engine")` and is fully
/// reproducible in isolation.
#[derive(Debug, Clone)]
pub struct EnsembleRun<'a> {
    pub lat: &'a Lattice,
    pub schedule: Option<&'a SweepSchedule>,
    pub mode: EvolutionMode,
    pub initial: InitialEnsemble,
    pub observable_kinds: Vec<crate::analysis::observables::ObservableKind>,
    pub n_replicas: usize,
    pub master_seed: u64,
    pub keep_trajectories: bool,
}

/// Number of jackknife bins used when aggregating replicas.
pub const JACKKNIFE_BINS: usize = 20;

/// Aggregated ensemble output: per-bin sums per observable and time point.
/// Bin assignment is `replica % JACKKNIFE_BINS`, so aggregation is an
/// order-independent merge.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `bin_sums[obs][time][bin]`
    pub bin_sums: Vec<Vec<Vec<f64>>>,
    /// replicas per bin
    pub bin_counts: Vec<usize>,
    pub n_replicas: usize,
    /// Raw per-replica trajectories in replica order, if requested.
    pub trajectories: Option<Vec<Trajectory>>,
}

impl EnsembleResult {
    /// Jackknife mean and error of one observable at one time index.
    pub fn mean_err(&self, obs: usize, time_idx: usize) -> (f64, f64) {
        crate::sse::jackknife_mean_err(&self.bin_sums[obs][time_idx], &self.bin_counts)
    }

    /// Jackknife mean and error of the average of several observables at one
    /// time index (used to pool symmetry-equivalent momenta).
    pub fn class_mean_err(&self, obs_indices: &[usize], time_idx: usize) -> (f64, f64) {
        let members = obs_indices.len() as f64;
        let mut sums = vec![0.0f64; self.bin_counts.len()];
        for &o in obs_indices {
            for (b, s) in self.bin_sums[o][time_idx].iter().enumerate() {
                sums[b] += s / members;
            }
        }
        crate::sse::jackknife_mean_err(&sums, &self.bin_counts)
    }

    /// Jackknife mean and error of the ratio mean(a)/mean(b)^2 (the Binder
    /// combination) at one time index.
    pub fn binder_mean_err(&self, obs_m4: usize, obs_m2: usize, time_idx: usize) -> (f64, f64) {
        let m4 = &self.bin_sums[obs_m4][time_idx];
        let m2 = &self.bin_sums[obs_m2][time_idx];
        let counts = &self.bin_counts;
        let total4: f64 = m4.iter().sum();
        let total2: f64 = m2.iter().sum();
        let n: usize = counts.iter().sum();
        let full = (total4 / n as f64) / (total2 / n as f64).powi(2);
        let bins = m4.len();
        let mut estimates = Vec::with_capacity(bins);
        for b in 0..bins {
            let rest_n = (n - counts[b]) as f64;
            let mean4 = (total4 - m4[b]) / rest_n;
            let mean2 = (total2 - m2[b]) / rest_n;
            estimates.push(mean4 / (mean2 * mean2));
        }
        let mean_est = estimates.iter().sum::<f64>() / bins as f64;
        let var: f64 = estimates
            .iter()
            .map(|e| (e - mean_est) * (e - mean_est))
            .sum();
        let err = ((bins as f64 - 1.0) / bins as f64 * var).sqrt();
        (full, err)
    }
}

fn run_replica(
    spec: &EnsembleRun,
    observables: &ObservableSet,
    replica: u64,
) -> Result<Trajectory> {
    let mut rng = stream_rng(spec.master_seed, replica, "engine");
    let mut cfg = match &spec.initial {
        InitialEnsemble::Fixed(c) => c.clone(),
        InitialEnsemble::Pool(pool) => pool[replica as usize % pool.len()].clone(),
        InitialEnsemble::Sector(m) => {
            SpinConfiguration::random_in_sector(spec.lat.n_sites(), *m, &mut rng)?
        }
        InitialEnsemble::Uniform => SpinConfiguration::random_uniform(spec.lat.n_sites(), &mut rng),
    };
    match &spec.mode {
        EvolutionMode::Discrete {
            rounds,
            record_every,
        } => {
            let schedule = spec
                .schedule
                .ok_or_else(|| Error::config("discrete mode requires a schedule"))?;
            evolve_discrete(
                &mut cfg,
                spec.lat,
                schedule,
                *rounds,
                *record_every,
                observables,
                &mut rng,
            )
        }
        EvolutionMode::Continuous { gamma, grid } => {
            evolve_continuous(&mut cfg, spec.lat, *gamma, grid, observables, &mut rng)
        }
    }
}

impl<'a> EnsembleRun<'a> {
    pub fn new(
        lat: &'a Lattice,
        schedule: Option<&'a SweepSchedule>,
        mode: EvolutionMode,
        initial: InitialEnsemble,
        n_replicas: usize,
        master_seed: u64,
    ) -> Self {
        EnsembleRun {
            lat,
            schedule,
            mode,
            initial,
            observable_kinds: Vec::new(),
            n_replicas,
            master_seed,
            keep_trajectories: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_replicas == 0 {
            return Err(Error::config("replica count must be at least 1"));
        }
        if matches!(&self.initial, InitialEnsemble::Pool(p) if p.is_empty()) {
            return Err(Error::config("initial configuration pool is empty"));
        }
        Ok(())
    }
}

fn aggregate(spec: &EnsembleRun, trajectories: Vec<Trajectory>) -> EnsembleResult {
    let times = spec.mode.record_times();
    let n_obs = spec.observable_kinds.len();
    let n_times = times.len();
    let mut bin_sums = vec![vec![vec![0.0f64; JACKKNIFE_BINS]; n_times]; n_obs];
    let mut bin_counts = vec![0usize; JACKKNIFE_BINS];
    for (r, traj) in trajectories.iter().enumerate() {
        let bin = r % JACKKNIFE_BINS;
        bin_counts[bin] += 1;
        for (o, col) in traj.values.iter().enumerate() {
            for (t, &v) in col.iter().enumerate() {
                bin_sums[o][t][bin] += v;
            }
        }
    }
    let names = spec.observable_kinds.iter().map(|k| k.name()).collect();
    EnsembleResult {
        times,
        names,
        bin_sums,
        bin_counts,
        n_replicas: spec.n_replicas,
        trajectories: spec.keep_trajectories.then_some(trajectories),
    }
}

/// Run one replica of an ensemble specification. The result depends only on
/// (master_seed, replica) and the physics parameters; the CLI checkpoint
/// path uses this to re-run exactly the missing replicas.
pub fn run_single_replica(spec: &EnsembleRun, replica: u64) -> Result<Trajectory> {
    let observables = ObservableSet::new(spec.lat, &spec.observable_kinds);
    run_replica(spec, &observables, replica)
}

/// Aggregate externally produced trajectories (in replica order) exactly as
/// the ensemble runners do.
pub fn aggregate_ensemble(spec: &EnsembleRun, trajectories: Vec<Trajectory>) -> EnsembleResult {
    aggregate(spec, trajectories)
}

/// Run an explicit set of replica ids, returning trajectories in the same
/// order. Used by the checkpoint/resume path to compute only what is
/// missing.
pub fn run_replica_set(spec: &EnsembleRun, ids: &[u64]) -> Result<Vec<Trajectory>> {
    let observables = ObservableSet::new(spec.lat, &spec.observable_kinds);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ids.par_iter()
            .map(|&r| run_replica(spec, &observables, r))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.iter()
            .map(|&r| run_replica(spec, &observables, r))
            .collect()
    }
}

/// Run all replicas sequentially. Always available; the parallel runner
/// produces bitwise-identical aggregates.
pub fn run_ensemble_seq(spec: &EnsembleRun) -> Result<EnsembleResult> {
    spec.validate()?;
    let observables = ObservableSet::new(spec.lat, &spec.observable_kinds);
    let trajectories: Result<Vec<Trajectory>> = (0..spec.n_replicas as u64)
        .map(|r| run_replica(spec, &observables, r))
        .collect();
    Ok(aggregate(spec, trajectories?))
}

/// Run all replicas over the rayon worker pool. Replica results are
/// collected in replica order and folded sequentially, so the output is
/// independent of scheduling and thread count.
#[cfg(feature = "parallel")]
pub fn run_ensemble(spec: &EnsembleRun) -> Result<EnsembleResult> {
    use rayon::prelude::*;
    spec.validate()?;
    let observables = ObservableSet::new(spec.lat, &spec.observable_kinds);
    let trajectories: Result<Vec<Trajectory>> = (0..spec.n_replicas as u64)
        .into_par_iter()
        .map(|r| run_replica(spec, &observables, r))
        .collect();
    Ok(aggregate(spec, trajectories?))
}

#[cfg(not(feature = "parallel"))]
pub fn run_ensemble(spec: &EnsembleRun) -> Result<EnsembleResult> {
    run_ensemble_seq(spec)
}

/// Size the global worker pool (effective once per process). Returns quietly
/// if a pool already exists.
#[cfg(feature = "parallel")]
pub fn configure_worker_pool(n_workers: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_worker_pool(_n_workers: usize) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::observables::{Convention, ObservableKind};
    use crate::lattice::build_schedule;

    fn obs_ms2_sf() -> Vec<ObservableKind> {
        vec![
            ObservableKind::Ms2(Convention::Sigma),
            ObservableKind::StructureFactor(0, 0),
            ObservableKind::TotalSigma,
        ]
    }

    #[test]
    fn all_up_configuration_is_frozen() {
        let lat = Lattice::square(4).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let set = ObservableSet::new(&lat, &obs_ms2_sf());
        let mut cfg = SpinConfiguration::all_up(lat.n_sites());
        let mut rng = stream_rng(21, 0, "engine-test");
        let traj = evolve_discrete(&mut cfg, &lat, &schedule, 20, 1, &set, &mut rng).unwrap();
        for col in &traj.values {
            assert!(col.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(cfg, SpinConfiguration::all_up(lat.n_sites()));
    }

    #[test]
    fn zero_mode_is_exactly_constant() {
        let lat = Lattice::square(4).unwrap();
        let set = ObservableSet::new(&lat, &[ObservableKind::StructureFactor(0, 0)]);
        let mut rng = stream_rng(22, 0, "engine-test");
        let mut cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.3).collect();
        let traj = evolve_continuous(&mut cfg, &lat, 1.0, &grid, &set, &mut rng).unwrap();
        let first = traj.values[0][0];
        for &v in &traj.values[0] {
            assert_eq!(v, first);
        }
    }

    #[test]
    fn continuous_zero_time_grid_records_initial_only() {
        let lat = Lattice::square(2).unwrap();
        let set = ObservableSet::new(&lat, &obs_ms2_sf());
        let mut rng = stream_rng(23, 0, "engine-test");
        let mut cfg = SpinConfiguration::neel(&lat);
        let traj = evolve_continuous(&mut cfg, &lat, 1.0, &[0.0], &set, &mut rng).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.values[0][0], 16.0); // Neel Ms^2 in sigma units
    }

    #[test]
    fn event_stream_is_poissonian() {
        let lat = Lattice::square(4).unwrap();
        let gamma = 0.7;
        let t_max = 50.0;
        let mut rng = stream_rng(24, 0, "engine-test");
        let stream = sample_event_stream(&lat, gamma, t_max, &mut rng);
        assert!(stream.events.windows(2).all(|w| w[1].0 > w[0].0));
        let expected = lat.n_bonds() as f64 * gamma * t_max;
        let n = stream.events.len() as f64;
        assert!(
            (n - expected).abs() < 5.0 * expected.sqrt(),
            "events {n} vs expected {expected}"
        );
        // Gap distribution: mean ~ 1/rate.
        let rate = lat.n_bonds() as f64 * gamma;
        let gaps: Vec<f64> = stream.events.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(
            (mean_gap * rate - 1.0).abs() < 5.0 / (gaps.len() as f64).sqrt(),
            "mean gap {mean_gap}"
        );
    }

    #[test]
    fn steady_state_sector_zero_l2_matches_enumeration() {
        let lat = Lattice::square(2).unwrap();
        let mut rng = stream_rng(25, 0, "engine-test");
        let samples = steady_state_sample(&lat, 0, &mut rng, 30_000).unwrap();
        // 6 states, uniform: frequencies within 5 sigma of 1/6.
        let mut counts = std::collections::HashMap::new();
        for s in &samples {
            *counts.entry(s.to_basis_index()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let n = samples.len() as f64;
        for (_, &c) in &counts {
            let p = c as f64 / n;
            assert!((p - 1.0 / 6.0).abs() < 5.0 * (1.0 / 6.0 * 5.0 / 6.0 / n).sqrt());
        }
        // All-up sector is a single configuration with Ms = 0.
        let all_up = steady_state_sample(&lat, 4, &mut rng, 3).unwrap();
        for cfg in &all_up {
            assert_eq!(cfg.total_sigma(), 4);
            assert_eq!(
                crate::analysis::observables::staggered_magnetization_sigma(&lat, cfg),
                0
            );
        }
        assert!(steady_state_sample(&lat, 5, &mut rng, 1).is_err());
    }

    #[test]
    fn uniform_sector_distribution_is_stationary_under_one_round() {
        let lat = Lattice::square(4).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let kinds = vec![
            ObservableKind::Ms2(Convention::Sigma),
            ObservableKind::StructureFactor(1, 0),
        ];
        let set = ObservableSet::new(&lat, &kinds);
        let mut rng = stream_rng(26, 0, "engine-test");
        let n = 20_000;
        let mut before = vec![0.0; kinds.len()];
        let mut after = vec![0.0; kinds.len()];
        let mut before_sq = vec![0.0; kinds.len()];
        let mut after_sq = vec![0.0; kinds.len()];
        let mut buf = Vec::new();
        for _ in 0..n {
            let mut cfg = SpinConfiguration::random_in_sector(lat.n_sites(), 0, &mut rng).unwrap();
            set.evaluate_into(&cfg, &mut buf);
            for (k, &v) in buf.iter().enumerate() {
                before[k] += v;
                before_sq[k] += v * v;
            }
            evolve_discrete(&mut cfg, &lat, &schedule, 1, 1, &set, &mut rng).unwrap();
            set.evaluate_into(&cfg, &mut buf);
            for (k, &v) in buf.iter().enumerate() {
                after[k] += v;
                after_sq[k] += v * v;
            }
        }
        for k in 0..kinds.len() {
            let nb = n as f64;
            let mean_b = before[k] / nb;
            let mean_a = after[k] / nb;
            let var = (before_sq[k] / nb - mean_b * mean_b) + (after_sq[k] / nb - mean_a * mean_a);
            let err = (var / nb).sqrt();
            assert!(
                (mean_a - mean_b).abs() < 3.5 * err,
                "obs {k}: {mean_b} -> {mean_a} (err {err})"
            );
        }
    }

    #[test]
    fn engine_statistics_match_exact_classical_evolution() {
        // 2x2 from a fixed antiparallel-rich basis state: the ensemble mean
        // of Ms^2 after each round must match the exact transfer-matrix
        // evolution of the same kernel.
        let lat = Lattice::square(2).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let start = SpinConfiguration::from_basis_index(4, 0b0110);
        let rounds = 4;
        let mut spec = EnsembleRun::new(
            &lat,
            Some(&schedule),
            EvolutionMode::Discrete {
                rounds,
                record_every: 1,
            },
            InitialEnsemble::Fixed(start.clone()),
            20_000,
            31,
        );
        spec.observable_kinds = vec![ObservableKind::Ms2(Convention::Sigma)];
        let result = run_ensemble(&spec).unwrap();

        let n = lat.n_sites();
        let latc = lat.clone();
        let ms2 = crate::oracle::DiagonalObservable::from_fn(n, "ms2", move |c| {
            let m = crate::analysis::observables::staggered_magnetization_sigma(&latc, c);
            (m * m) as f64
        });
        let mut p0 = nalgebra::DVector::zeros(1 << n);
        p0[start.to_basis_index()] = 1.0;
        let exact = crate::oracle::classical_evolve_discrete(
            &p0,
            &lat,
            &schedule,
            rounds,
            std::slice::from_ref(&ms2),
        );
        for t in 0..=rounds {
            let (mean, err) = result.mean_err(0, t);
            let z = (mean - exact.values[0][t]).abs() / err.max(1e-9);
            assert!(
                z <= 3.5,
                "round {t}: engine {mean} vs exact {} ({z:.2} sigma)",
                exact.values[0][t]
            );
        }
    }

    #[test]
    fn discrete_and_continuous_reach_the_same_steady_state() {
        let lat = Lattice::square(4).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let kinds = vec![ObservableKind::StructureFactor(1, 0)];
        let mut disc = EnsembleRun::new(
            &lat,
            Some(&schedule),
            EvolutionMode::Discrete {
                rounds: 60,
                record_every: 60,
            },
            InitialEnsemble::Sector(0),
            4000,
            41,
        );
        disc.observable_kinds = kinds.clone();
        let disc = run_ensemble(&disc).unwrap();
        let mut cont = EnsembleRun::new(
            &lat,
            None,
            EvolutionMode::Continuous {
                gamma: 1.0,
                grid: vec![0.0, 60.0],
            },
            InitialEnsemble::Sector(0),
            4000,
            42,
        );
        cont.observable_kinds = kinds;
        let cont = run_ensemble(&cont).unwrap();
        let (m_disc, e_disc) = disc.mean_err(0, disc.times.len() - 1);
        let (m_cont, e_cont) = cont.mean_err(0, cont.times.len() - 1);
        let sigma = (e_disc * e_disc + e_cont * e_cont).sqrt();
        assert!(
            (m_disc - m_cont).abs() <= 3.5 * sigma,
            "steady states differ: {m_disc} vs {m_cont} (sigma {sigma})"
        );
        // Both at the analytic sector-0 value.
        let expected = 256.0 / 15.0;
        assert!((m_disc - expected).abs() <= 3.5 * e_disc);
        assert!((m_cont - expected).abs() <= 3.5 * e_cont);
    }

    #[test]
    fn round_reversal_transposes_the_transition_matrix() {
        // Each bond kernel is symmetric, so reversing the application order
        // transposes the full-round transition matrix: the probability of
        // i -> j forward equals j -> i reversed (reversibility with respect
        // to the uniform measure). The matrices themselves differ.
        use crate::oracle::classical_step_matrix;
        let lat = Lattice::square(2).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let bonds: Vec<usize> = schedule.round_bonds().collect();
        let dim = 1 << lat.n_sites();
        let mut forward = nalgebra::DMatrix::<f64>::identity(dim, dim);
        for &b in &bonds {
            forward = classical_step_matrix(&lat, b) * forward;
        }
        let mut reversed = nalgebra::DMatrix::<f64>::identity(dim, dim);
        for &b in bonds.iter().rev() {
            reversed = classical_step_matrix(&lat, b) * reversed;
        }
        assert!((&forward - reversed.transpose()).abs().max() < 1e-14);
        // Column-stochastic in both orders.
        for j in 0..dim {
            let col: f64 = (0..dim).map(|i| forward[(i, j)]).sum();
            assert!((col - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ensemble_runner_is_deterministic_and_matches_sequential() {
        let lat = Lattice::square(4).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let mut spec = EnsembleRun::new(
            &lat,
            Some(&schedule),
            EvolutionMode::Discrete {
                rounds: 10,
                record_every: 2,
            },
            InitialEnsemble::Sector(0),
            200,
            987,
        );
        spec.observable_kinds = obs_ms2_sf();
        let a = run_ensemble(&spec).unwrap();
        let b = run_ensemble_seq(&spec).unwrap();
        assert_eq!(a.times, b.times);
        for (sa, sb) in a.bin_sums.iter().zip(&b.bin_sums) {
            for (ta, tb) in sa.iter().zip(sb) {
                assert_eq!(ta, tb);
            }
        }
    }
}
