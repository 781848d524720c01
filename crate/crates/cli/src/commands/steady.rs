//! `spindissim steady`: direct samples from the per-sector stationary
//! distribution, with the analytic structure-factor prediction alongside.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use spindissim_core::analysis::fit::steady_state_prediction;
use spindissim_core::analysis::observables::{ObservableKind, ObservableSet};
use spindissim_core::engine::steady_state_sample;
use spindissim_core::error::Result;
use spindissim_core::lattice::Momentum;
use spindissim_core::rngstream::stream_rng;
use spindissim_core::sse::jackknife_mean_err;

use crate::commands::{ensure_dir, write_json};
use crate::config::{Config, InitKind};

#[derive(Serialize)]
struct SteadyReport {
    l: usize,
    sector: i64,
    n_samples: usize,
    observables: Vec<SteadyObservable>,
}

#[derive(Serialize)]
struct SteadyObservable {
    name: String,
    mean: f64,
    err: f64,
    /// Analytic stationary value, for structure factors at p != 0.
    prediction: Option<f64>,
    /// |mean - prediction| / err when a prediction exists.
    z_score: Option<f64>,
}

pub fn run(config: &Config, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let lat = config.lattice()?;
    let sector = match config.parse_init()? {
        InitKind::Steady(m) => m,
        _ => config.run.sector_filter.unwrap_or(0),
    };
    let kinds = config.observable_kinds()?;
    let set = ObservableSet::new(&lat, &kinds);
    let n_samples = config.run.replicas;
    let mut rng = stream_rng(config.run.seed, 0, "steady");
    let samples = steady_state_sample(&lat, sector, &mut rng, n_samples)?;

    const BINS: usize = 20;
    let mut sums = vec![[0.0f64; BINS]; kinds.len()];
    let mut counts = [0usize; BINS];
    let mut buf = Vec::new();
    for (i, cfg) in samples.iter().enumerate() {
        let bin = i * BINS / n_samples;
        set.evaluate_into(cfg, &mut buf);
        counts[bin] += 1;
        for (k, &v) in buf.iter().enumerate() {
            sums[k][bin] += v;
        }
    }

    let observables = kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let (mean, err) = jackknife_mean_err(&sums[k], &counts);
            let prediction = match kind {
                ObservableKind::StructureFactor(k1, k2) => {
                    let momentum = Momentum::from_indices(&lat, *k1, *k2);
                    steady_state_prediction(lat.n_sites(), &momentum, &[(sector, 1.0)]).ok()
                }
                _ => None,
            };
            let z_score = prediction.map(|p| (mean - p).abs() / err.max(1e-12));
            SteadyObservable {
                name: kind.name(),
                mean,
                err,
                prediction,
                z_score,
            }
        })
        .collect();

    let report = SteadyReport {
        l: config.run.l,
        sector,
        n_samples,
        observables,
    };
    write_json(&out_dir.join("steady_report.json"), &report)?;

    if config.thermal.dump_configurations {
        let mut text = String::new();
        for (i, cfg) in samples.iter().enumerate() {
            let _ = write!(text, "{},{}", config.run.seed, i);
            for site in 0..lat.n_sites() {
                let _ = write!(text, ",{}", cfg.get(site));
            }
            text.push('\n');
        }
        std::fs::write(out_dir.join("steady_samples.csv"), text).map_err(|e| {
            spindissim_core::Error::config(format!("cannot write steady_samples.csv: {e}"))
        })?;
    }
    println!(
        "steady: L={} sector={} -> {} samples over {} observables",
        config.run.l,
        sector,
        n_samples,
        report.observables.len()
    );
    Ok(())
}
