//! `spindissim evolve`: replica-farmed real-time evolution with optional
//! checkpointing and resume.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use spindissim_core::analysis::observables::{Convention, ObservableKind};
use spindissim_core::analysis::series::{TimeSeries, TimeUnit};
use spindissim_core::engine::{
    aggregate_ensemble, run_ensemble, run_replica_set, EnsembleResult, EnsembleRun, EvolutionMode,
    InitialEnsemble, Trajectory,
};
use spindissim_core::error::{Error, Result};
use spindissim_core::lattice::build_schedule;
use spindissim_core::spins::SpinConfiguration;
use spindissim_core::sse::{self, EnsembleSpec};

use crate::commands::{ensure_dir, sanitize_name, trajectory_rows, write_json};
use crate::config::{Config, InitKind};
use crate::manifest::Manifest;

pub fn run(config: &Config, out_dir: &Path, resume: bool) -> Result<()> {
    ensure_dir(out_dir)?;
    let lat = config.lattice()?;
    let schedule = build_schedule(&lat)?;
    let kinds = config.observable_kinds()?;
    let mode = build_mode(config)?;
    let time_unit = match mode {
        EvolutionMode::Discrete { .. } => TimeUnit::Rounds,
        EvolutionMode::Continuous { .. } => TimeUnit::GammaT,
    };

    let config_hash = config.hash();
    let mut manifest = if resume {
        let existing = Manifest::load(out_dir)?;
        if existing.config_hash != config_hash {
            return Err(Error::config(format!(
                "refusing to resume: manifest config hash {} does not match current config {}",
                existing.config_hash, config_hash
            )));
        }
        existing
    } else {
        Manifest::new(config_hash, config.run.seed, config.run.replicas)
    };
    manifest.save(out_dir)?;

    let initial = build_initial(config, &lat)?;
    let mut spec = EnsembleRun::new(
        &lat,
        Some(&schedule),
        mode,
        initial,
        config.run.replicas,
        config.run.seed,
    );
    spec.observable_kinds = kinds.clone();
    let names: Vec<String> = kinds.iter().map(|k| k.name()).collect();

    let result = if config.run.checkpoint_interval > 0 {
        run_with_checkpoints(config, &spec, &names, out_dir, &mut manifest)?
    } else {
        let mut spec = spec.clone();
        spec.keep_trajectories = config.run.dump_trajectories;
        run_ensemble(&spec)?
    };

    write_series(config, &result, &kinds, time_unit, out_dir)?;
    if config.run.dump_trajectories {
        if let Some(trajectories) = &result.trajectories {
            let mut text = String::from("replica,time,observable,value\n");
            for (r, traj) in trajectories.iter().enumerate() {
                text.push_str(&trajectory_rows(r as u64, &names, traj));
            }
            std::fs::write(out_dir.join("trajectories.csv"), text)
                .map_err(|e| Error::config(format!("cannot write trajectories.csv: {e}")))?;
        }
    }
    manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
    manifest.completed_replicas = (0..config.run.replicas as u64).collect();
    manifest.save(out_dir)?;
    println!(
        "evolve: {} replicas on L={} ({} mode) -> {} observables over {} record times",
        config.run.replicas,
        config.run.l,
        config.run.mode,
        result.names.len(),
        result.times.len()
    );
    Ok(())
}

fn build_mode(config: &Config) -> Result<EvolutionMode> {
    match config.run.mode.as_str() {
        "discrete" => Ok(EvolutionMode::Discrete {
            rounds: config.run.rounds.expect("validated"),
            record_every: config.run.record_every,
        }),
        "continuous" => Ok(EvolutionMode::Continuous {
            gamma: config.run.gamma.expect("validated"),
            grid: config.time_grid()?,
        }),
        _ => unreachable!("validated"),
    }
}

fn build_initial(
    config: &Config,
    lat: &spindissim_core::lattice::Lattice,
) -> Result<InitialEnsemble> {
    Ok(match config.parse_init()? {
        InitKind::Thermal => {
            let spec = EnsembleSpec {
                beta_j: config.run.beta_j,
                chains: config.thermal.chains,
                warmup: config.thermal.warmup,
                sample_spacing: config.thermal.sample_spacing,
                n_samples: config.run.replicas,
                sector_filter: config.run.sector_filter,
                master_seed: config.run.seed,
            };
            let samples = sse::sample_ensemble(lat, &spec)?;
            InitialEnsemble::Pool(samples.into_iter().map(|s| s.configuration).collect())
        }
        InitKind::Neel => InitialEnsemble::Fixed(SpinConfiguration::neel(lat)),
        InitKind::AllUp => InitialEnsemble::Fixed(SpinConfiguration::all_up(lat.n_sites())),
        InitKind::Uniform => InitialEnsemble::Uniform,
        InitKind::Steady(sector) => InitialEnsemble::Sector(sector),
    })
}

fn checkpoint_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoint")
}

fn replica_file(out_dir: &Path, replica: u64) -> PathBuf {
    checkpoint_dir(out_dir).join(format!("replica_{replica:08}.csv"))
}

fn run_with_checkpoints(
    config: &Config,
    spec: &EnsembleRun,
    names: &[String],
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<EnsembleResult> {
    ensure_dir(&checkpoint_dir(out_dir))?;
    let n = config.run.replicas as u64;
    let completed: BTreeSet<u64> = manifest
        .completed_replicas
        .iter()
        .copied()
        .filter(|&r| r < n && replica_file(out_dir, r).exists())
        .collect();
    let missing: Vec<u64> = (0..n).filter(|r| !completed.contains(r)).collect();

    let expected_times = spec.mode.record_times();
    let mut trajectories: Vec<Option<Trajectory>> = Vec::with_capacity(n as usize);
    for r in 0..n {
        if completed.contains(&r) {
            let parsed = parse_replica_file(out_dir, r, names, &expected_times);
            if parsed.times.is_empty() {
                return Err(Error::config(format!(
                    "checkpoint file for replica {r} is empty or malformed"
                )));
            }
            trajectories.push(Some(parsed));
        } else {
            trajectories.push(None);
        }
    }

    manifest.completed_replicas = completed.iter().copied().collect();
    for chunk in missing.chunks(config.run.checkpoint_interval.max(1)) {
        let computed = run_replica_set(spec, chunk)?;
        for (&replica, traj) in chunk.iter().zip(computed) {
            let mut text = String::from("replica,time,observable,value\n");
            text.push_str(&trajectory_rows(replica, names, &traj));
            std::fs::write(replica_file(out_dir, replica), text)
                .map_err(|e| Error::config(format!("cannot write checkpoint: {e}")))?;
            manifest.completed_replicas.push(replica);
            trajectories[replica as usize] = Some(traj);
        }
        manifest.save(out_dir)?;
    }

    let trajectories: Vec<Trajectory> = trajectories
        .into_iter()
        .enumerate()
        .map(|(r, t)| t.ok_or_else(|| Error::invariant(format!("replica {r} missing"))))
        .collect::<Result<_>>()?;
    let mut spec = spec.clone();
    spec.keep_trajectories = config.run.dump_trajectories;
    Ok(aggregate_ensemble(&spec, trajectories))
}

fn parse_replica_file(
    out_dir: &Path,
    replica: u64,
    names: &[String],
    expected_times: &[f64],
) -> Trajectory {
    let empty = Trajectory {
        times: Vec::new(),
        values: vec![Vec::new(); names.len()],
        initial_sigma: 0,
    };
    let Ok(text) = std::fs::read_to_string(replica_file(out_dir, replica)) else {
        return empty;
    };
    let mut traj = Trajectory {
        times: expected_times.to_vec(),
        values: vec![Vec::with_capacity(expected_times.len()); names.len()],
        initial_sigma: 0,
    };
    for (row, line) in text.lines().skip(1).enumerate() {
        // Observable names may contain commas (sf[1,0]); split the fixed
        // fields off both ends.
        let Some((_replica, rest)) = line.split_once(',') else {
            return empty;
        };
        let Some((_time, rest)) = rest.split_once(',') else {
            return empty;
        };
        let Some((obs_name, value_text)) = rest.rsplit_once(',') else {
            return empty;
        };
        let obs_idx = row % names.len();
        if obs_name != names[obs_idx] {
            return empty;
        }
        let Ok(value) = value_text.parse::<f64>() else {
            return empty;
        };
        traj.values[obs_idx].push(value);
    }
    if traj
        .values
        .iter()
        .any(|col| col.len() != expected_times.len())
    {
        return empty;
    }
    traj
}

fn write_series(
    config: &Config,
    result: &EnsembleResult,
    kinds: &[ObservableKind],
    time_unit: TimeUnit,
    out_dir: &Path,
) -> Result<()> {
    for (o, kind) in kinds.iter().enumerate() {
        let convention = match kind {
            ObservableKind::Ms(c) | ObservableKind::Ms2(c) | ObservableKind::Ms4(c) => *c,
            _ => Convention::Sigma,
        };
        let mut series = TimeSeries::new(result.names[o].clone(), convention, time_unit);
        for (t_idx, &time) in result.times.iter().enumerate() {
            let (mean, err) = result.mean_err(o, t_idx);
            series.push(time, mean, err, result.n_replicas as u64);
        }
        series
            .write_csv(&out_dir.join(format!("series_{}.csv", sanitize_name(&result.names[o]))))?;
    }

    // Binder ratio whenever the matching moment pair was recorded.
    for convention in [Convention::SpinHalf, Convention::Sigma] {
        let m2 = kinds
            .iter()
            .position(|k| *k == ObservableKind::Ms2(convention));
        let m4 = kinds
            .iter()
            .position(|k| *k == ObservableKind::Ms4(convention));
        if let (Some(m2), Some(m4)) = (m2, m4) {
            let mut series = TimeSeries::new("binder", convention, time_unit);
            for (t_idx, &time) in result.times.iter().enumerate() {
                let (mean, err) = result.binder_mean_err(m4, m2, t_idx);
                series.push(time, mean, err, result.n_replicas as u64);
            }
            series.write_csv(&out_dir.join(format!("series_binder_{}.csv", convention.label())))?;
        }
    }

    write_json(
        &out_dir.join("series_index.json"),
        &serde_json::json!({
            "observables": result.names,
            "times": result.times.len(),
            "replicas": result.n_replicas,
            "time_unit": match time_unit { TimeUnit::Rounds => "rounds", TimeUnit::GammaT => "gamma_t" },
        }),
    )?;
    let _ = config;
    Ok(())
}
