//! Replica-ensemble throughput: rayon worker pool vs the sequential runner.
//!
//! Run with `cargo bench -p spindissim-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spindissim_core::analysis::observables::{Convention, ObservableKind};
use spindissim_core::engine::{
    run_ensemble, run_ensemble_seq, EnsembleRun, EvolutionMode, InitialEnsemble,
};
use spindissim_core::lattice::{build_schedule, Lattice};

fn observable_kinds() -> Vec<ObservableKind> {
    vec![
        ObservableKind::Ms2(Convention::SpinHalf),
        ObservableKind::Ms4(Convention::SpinHalf),
        ObservableKind::StructureFactor(1, 0),
        ObservableKind::StructureFactor(0, 1),
    ]
}

fn bench_discrete(c: &mut Criterion) {
    let lat = Lattice::square(16).unwrap();
    let schedule = build_schedule(&lat).unwrap();
    let mut group = c.benchmark_group("discrete_rounds");
    for &replicas in &[64usize, 256] {
        let mut spec = EnsembleRun::new(
            &lat,
            Some(&schedule),
            EvolutionMode::Discrete {
                rounds: 30,
                record_every: 5,
            },
            InitialEnsemble::Sector(0),
            replicas,
            7,
        );
        spec.observable_kinds = observable_kinds();
        group.bench_with_input(BenchmarkId::new("parallel", replicas), &spec, |b, spec| {
            b.iter(|| run_ensemble(spec).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", replicas),
            &spec,
            |b, spec| b.iter(|| run_ensemble_seq(spec).unwrap()),
        );
    }
    group.finish();
}

fn bench_continuous(c: &mut Criterion) {
    let lat = Lattice::square(16).unwrap();
    let grid: Vec<f64> = (0..=24).map(|i| i as f64 * 0.5).collect();
    let mut group = c.benchmark_group("continuous_events");
    for &replicas in &[64usize, 256] {
        let mut spec = EnsembleRun::new(
            &lat,
            None,
            EvolutionMode::Continuous {
                gamma: 1.0,
                grid: grid.clone(),
            },
            InitialEnsemble::Sector(0),
            replicas,
            7,
        );
        spec.observable_kinds = observable_kinds();
        group.bench_with_input(BenchmarkId::new("parallel", replicas), &spec, |b, spec| {
            b.iter(|| run_ensemble(spec).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", replicas),
            &spec,
            |b, spec| b.iter(|| run_ensemble_seq(spec).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_discrete, bench_continuous);
criterion_main!(benches);
