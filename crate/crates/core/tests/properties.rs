//! Property tests for the structural invariants: schedule partitioning,
//! conservation laws of the kernel, formatter round-trips, and fit
//! self-inversion.

use proptest::prelude::*;

use spindissim_core::analysis::fit::{
    finite_size_prediction, fit_exponential, fit_finite_size, fit_powerlaw, DataPoint, Window,
};
use spindissim_core::analysis::observables::{
    structure_factor, Convention, ObservableKind, ObservableSet,
};
use spindissim_core::analysis::series::fmt_g17;
use spindissim_core::engine::{evolve_discrete, EvolutionMode};
use spindissim_core::lattice::{build_schedule, Lattice, Momentum, MomentumGrid};
use spindissim_core::rngstream::stream_rng;
use spindissim_core::spins::SpinConfiguration;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedule_partitions_bonds_for_all_even_sides(half in 1usize..9) {
        let l = 2 * half;
        let lat = Lattice::square(l).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let mut seen = vec![false; lat.n_bonds()];
        for step in schedule.steps() {
            prop_assert_eq!(step.len(), lat.n_sites() / 2);
            let mut covered = vec![false; lat.n_sites()];
            for &id in step {
                let bond = lat.bond(id);
                prop_assert!(!covered[bond.a] && !covered[bond.b]);
                covered[bond.a] = true;
                covered[bond.b] = true;
                prop_assert!(!seen[id]);
                seen[id] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn momentum_norms_negation_symmetric(half in 1usize..9, k1 in 0usize..18, k2 in 0usize..18) {
        let l = 2 * half;
        let lat = Lattice::square(l).unwrap();
        let m = Momentum::from_indices(&lat, k1 % l, k2 % l);
        let n = Momentum::from_indices(&lat, (l - k1 % l) % l, (l - k2 % l) % l);
        prop_assert!((m.norm - n.norm).abs() < 1e-12);
    }

    #[test]
    fn basis_index_round_trip(n_sites in 1usize..11, raw in any::<u16>()) {
        let idx = (raw as usize) % (1usize << n_sites);
        let cfg = SpinConfiguration::from_basis_index(n_sites, idx);
        prop_assert_eq!(cfg.to_basis_index(), idx);
    }

    #[test]
    fn engine_round_conserves_sigma_and_zero_mode(seed in any::<u64>(), half in 1usize..5) {
        let l = 2 * half;
        let lat = Lattice::square(l).unwrap();
        let schedule = build_schedule(&lat).unwrap();
        let set = ObservableSet::new(&lat, &[ObservableKind::StructureFactor(0, 0), ObservableKind::TotalSigma]);
        let mut rng = stream_rng(seed, 0, "prop-engine");
        let mut cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let before = cfg.total_sigma();
        let traj = evolve_discrete(&mut cfg, &lat, &schedule, 5, 1, &set, &mut rng).unwrap();
        prop_assert_eq!(cfg.total_sigma(), before);
        for col in &traj.values {
            prop_assert!(col.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn g17_round_trips_any_finite_float(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let s = fmt_g17(x);
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn pi_pi_structure_factor_equals_staggered_square(seed in any::<u64>(), half in 1usize..5) {
        let l = 2 * half;
        let lat = Lattice::square(l).unwrap();
        let grid = MomentumGrid::new(&lat);
        let mut rng = stream_rng(seed, 1, "prop-obs");
        let cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let pipi = grid.get(l / 2, l / 2);
        let sf = structure_factor(&lat, &cfg, &pipi, Convention::Sigma);
        let ms = spindissim_core::analysis::observables::staggered_magnetization_sigma(&lat, &cfg) as f64;
        prop_assert!((sf - ms * ms).abs() < 1e-7 * (1.0 + ms * ms));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponential_fit_self_inversion(
        a in -10.0f64..10.0,
        b_abs in 0.5f64..10.0,
        b_sign in any::<bool>(),
        tau in 0.2f64..20.0,
    ) {
        let b = if b_sign { b_abs } else { -b_abs };
        let data: Vec<DataPoint> = (0..30)
            .map(|i| {
                let t = i as f64 * tau / 6.0;
                DataPoint::new(t, a + b * (-t / tau).exp(), 1e-3)
            })
            .collect();
        let fit = fit_exponential(&data, Window::all()).unwrap();
        prop_assert!((fit.value("A") - a).abs() < 1e-5 * (1.0 + a.abs()));
        prop_assert!((fit.value("B") - b).abs() < 1e-5 * (1.0 + b.abs()));
        prop_assert!((fit.value("tau") - tau).abs() < 1e-5 * tau);
    }

    #[test]
    fn powerlaw_fit_self_inversion(c in 0.05f64..20.0, r in 0.2f64..3.5) {
        let data: Vec<DataPoint> = (1..8)
            .map(|i| {
                let p = 0.25 * i as f64;
                DataPoint::new(p, c * p.powf(r), 1e-6)
            })
            .collect();
        let fit = fit_powerlaw(&data).unwrap();
        prop_assert!((fit.value("C") - c).abs() < 1e-6 * c);
        prop_assert!((fit.value("r") - r).abs() < 1e-6 * (1.0 + r));
    }

    #[test]
    fn finite_size_fit_self_inversion(m in 0.05f64..0.5, xi in 0.0f64..1.6) {
        let data: Vec<DataPoint> = [8.0f64, 12.0, 16.0, 24.0]
            .iter()
            .map(|&l| DataPoint::new(l, finite_size_prediction(m, xi, l), 1e-4 * l * l))
            .collect();
        let fit = fit_finite_size(&data).unwrap();
        prop_assert!((fit.value("m_s") - m).abs() < 1e-5 * m, "m {} vs {}", fit.value("m_s"), m);
        prop_assert!((fit.value("xi") - xi).abs() < 2e-4 * (1.0 + xi), "xi {} vs {}", fit.value("xi"), xi);
    }
}

#[test]
fn record_times_cover_modes() {
    let discrete = EvolutionMode::Discrete {
        rounds: 10,
        record_every: 3,
    };
    assert_eq!(discrete.record_times(), vec![0.0, 3.0, 6.0, 9.0, 10.0]);
    let grid = vec![0.0, 0.5, 1.0];
    let continuous = EvolutionMode::Continuous {
        gamma: 1.0,
        grid: grid.clone(),
    };
    assert_eq!(continuous.record_times(), grid);
}
