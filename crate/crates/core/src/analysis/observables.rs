//! Diagonal observables of spin configurations: staggered moments, Fourier
//! structure factors, and the conserved total magnetization.
//!
//! Two normalization conventions coexist in the literature this code
//! follows: sigma = +/-1 and S^3 = +/-1/2. Structure factors default to
//! sigma units (the steady-state value L^4/(L^2-1) holds in that
//! convention); staggered moments default to spin-1/2 units (the ordered
//! moment 0.30743 holds there). The convention is always an explicit field,
//! never implicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Momentum};
use crate::spins::SpinConfiguration;

/// Spin normalization convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// sigma = +/-1
    Sigma,
    /// S^3 = +/-1/2
    SpinHalf,
}

impl Convention {
    /// Scale factor applied to one power of magnetization.
    pub fn scale(self) -> f64 {
        match self {
            Convention::Sigma => 1.0,
            Convention::SpinHalf => 0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Convention::Sigma => "sigma",
            Convention::SpinHalf => "spin_half",
        }
    }
}

/// Staggered magnetization in sigma units (an integer).
pub fn staggered_magnetization_sigma(lat: &Lattice, cfg: &SpinConfiguration) -> i64 {
    (0..lat.n_sites())
        .map(|s| lat.staggered_sign(s) * cfg.get(s) as i64)
        .sum()
}

/// (M_s, M_s^2, M_s^4) in the requested convention.
pub fn staggered_moments(
    lat: &Lattice,
    cfg: &SpinConfiguration,
    convention: Convention,
) -> (f64, f64, f64) {
    let m = staggered_magnetization_sigma(lat, cfg) as f64 * convention.scale();
    (m, m * m, m * m * m * m)
}

/// |S~(p)|^2 for a single momentum, sigma units by default scale.
pub fn structure_factor(
    lat: &Lattice,
    cfg: &SpinConfiguration,
    momentum: &Momentum,
    convention: Convention,
) -> f64 {
    let mut re = 0.0f64;
    let mut im = 0.0f64;
    for site in 0..lat.n_sites() {
        let (x1, x2) = lat.coords(site);
        let phase = momentum.p.0 * x1 as f64 + momentum.p.1 * x2 as f64;
        let s = cfg.get(site) as f64;
        re += s * phase.cos();
        im += s * phase.sin();
    }
    let scale = convention.scale();
    (re * re + im * im) * scale * scale
}

/// |S~(p)|^2 over a full momentum grid.
pub fn fourier_modes(
    lat: &Lattice,
    cfg: &SpinConfiguration,
    grid: &crate::lattice::MomentumGrid,
    convention: Convention,
) -> Vec<f64> {
    grid.momenta()
        .iter()
        .map(|m| structure_factor(lat, cfg, m, convention))
        .collect()
}

/// Observables the engine can record along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Staggered magnetization, first power.
    Ms(Convention),
    Ms2(Convention),
    Ms4(Convention),
    /// |S~(p)|^2 at momentum indices (k1, k2), sigma convention.
    StructureFactor(usize, usize),
    /// Total sigma (conserved; recorded for invariant checks).
    TotalSigma,
}

impl ObservableKind {
    pub fn name(&self) -> String {
        match self {
            ObservableKind::Ms(c) => format!("ms[{}]", c.label()),
            ObservableKind::Ms2(c) => format!("ms2[{}]", c.label()),
            ObservableKind::Ms4(c) => format!("ms4[{}]", c.label()),
            ObservableKind::StructureFactor(k1, k2) => format!("sf[{k1},{k2}]"),
            ObservableKind::TotalSigma => "stot".to_string(),
        }
    }

    /// Parse the textual form used in config files: `ms`, `ms2`, `ms4`
    /// (optionally suffixed `:sigma` or `:spin_half`), `sf:K1,K2`, `stot`.
    pub fn parse(text: &str) -> Result<Self> {
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (text, None),
        };
        let convention = |arg: Option<&str>, default: Convention| -> Result<Convention> {
            match arg {
                None => Ok(default),
                Some("sigma") => Ok(Convention::Sigma),
                Some("spin_half") => Ok(Convention::SpinHalf),
                Some(other) => Err(Error::config(format!("unknown convention '{other}'"))),
            }
        };
        match head {
            "ms" => Ok(ObservableKind::Ms(convention(arg, Convention::SpinHalf)?)),
            "ms2" => Ok(ObservableKind::Ms2(convention(arg, Convention::SpinHalf)?)),
            "ms4" => Ok(ObservableKind::Ms4(convention(arg, Convention::SpinHalf)?)),
            "stot" => Ok(ObservableKind::TotalSigma),
            "sf" => {
                let arg =
                    arg.ok_or_else(|| Error::config("sf needs momentum indices, e.g. sf:1,0"))?;
                let (k1, k2) = arg
                    .split_once(',')
                    .ok_or_else(|| Error::config("sf momentum must be 'k1,k2'"))?;
                let k1 = k1
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::config(format!("bad momentum index '{k1}': {e}")))?;
                let k2 = k2
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::config(format!("bad momentum index '{k2}': {e}")))?;
                Ok(ObservableKind::StructureFactor(k1, k2))
            }
            other => Err(Error::config(format!("unknown observable '{other}'"))),
        }
    }
}

/// A compiled set of observables with per-momentum phase tables, shared
/// read-only across replicas.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    kinds: Vec<ObservableKind>,
    names: Vec<String>,
    staggered: Vec<i8>,
    /// (cos, sin) tables per structure-factor observable, by site.
    phases: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl ObservableSet {
    pub fn new(lat: &Lattice, kinds: &[ObservableKind]) -> Self {
        let staggered = (0..lat.n_sites())
            .map(|s| lat.staggered_sign(s) as i8)
            .collect();
        let phases = kinds
            .iter()
            .map(|k| match k {
                ObservableKind::StructureFactor(k1, k2) => {
                    let m = Momentum::from_indices(lat, *k1, *k2);
                    let mut cos = Vec::with_capacity(lat.n_sites());
                    let mut sin = Vec::with_capacity(lat.n_sites());
                    for site in 0..lat.n_sites() {
                        let (x1, x2) = lat.coords(site);
                        let phase = m.p.0 * x1 as f64 + m.p.1 * x2 as f64;
                        cos.push(phase.cos());
                        sin.push(phase.sin());
                    }
                    Some((cos, sin))
                }
                _ => None,
            })
            .collect();
        ObservableSet {
            kinds: kinds.to_vec(),
            names: kinds.iter().map(|k| k.name()).collect(),
            staggered,
            phases,
        }
    }

    pub fn kinds(&self) -> &[ObservableKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn evaluate_into(&self, cfg: &SpinConfiguration, out: &mut Vec<f64>) {
        out.clear();
        let spins = cfg.as_slice();
        let mut ms_sigma: Option<f64> = None;
        let mut staggered = || {
            *ms_sigma.get_or_insert_with(|| {
                spins
                    .iter()
                    .zip(&self.staggered)
                    .map(|(&s, &e)| (s as i64 * e as i64) as f64)
                    .sum()
            })
        };
        for (idx, kind) in self.kinds.iter().enumerate() {
            let v = match kind {
                ObservableKind::Ms(c) => staggered() * c.scale(),
                ObservableKind::Ms2(c) => {
                    let m = staggered() * c.scale();
                    m * m
                }
                ObservableKind::Ms4(c) => {
                    let m = staggered() * c.scale();
                    m * m * m * m
                }
                ObservableKind::TotalSigma => cfg.total_sigma() as f64,
                ObservableKind::StructureFactor(_, _) => {
                    let (cos, sin) = self.phases[idx].as_ref().unwrap();
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for ((&s, c), sn) in spins.iter().zip(cos).zip(sin) {
                        let sv = s as f64;
                        re += sv * c;
                        im += sv * sn;
                    }
                    re * re + im * im
                }
            };
            out.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MomentumGrid;
    use approx::assert_relative_eq;

    #[test]
    fn neel_moments() {
        let lat = Lattice::square(4).unwrap();
        let neel = SpinConfiguration::neel(&lat);
        let (ms, ms2, _) = staggered_moments(&lat, &neel, Convention::SpinHalf);
        assert_relative_eq!(ms.abs(), 8.0); // L^2 / 2
        assert_relative_eq!(ms2, 64.0);
        let all_up = SpinConfiguration::all_up(lat.n_sites());
        let (ms, _, _) = staggered_moments(&lat, &all_up, Convention::SpinHalf);
        assert_relative_eq!(ms, 0.0);
    }

    #[test]
    fn structure_factor_special_points() {
        let lat = Lattice::square(4).unwrap();
        let grid = MomentumGrid::new(&lat);
        let all_up = SpinConfiguration::all_up(lat.n_sites());
        let zero = grid.get(0, 0);
        assert_relative_eq!(
            structure_factor(&lat, &all_up, &zero, Convention::Sigma),
            256.0 // L^4
        );
        let neel = SpinConfiguration::neel(&lat);
        let pipi = grid.get(2, 2);
        assert_relative_eq!(
            structure_factor(&lat, &neel, &pipi, Convention::Sigma),
            256.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn pi_pi_mode_equals_staggered_square_identity() {
        let lat = Lattice::square(4).unwrap();
        let grid = MomentumGrid::new(&lat);
        let pipi = grid.get(2, 2);
        let mut rng = crate::rngstream::stream_rng(3, 0, "obs-test");
        for _ in 0..50 {
            let cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
            let sf = structure_factor(&lat, &cfg, &pipi, Convention::Sigma);
            let ms = staggered_magnetization_sigma(&lat, &cfg) as f64;
            assert_relative_eq!(sf, ms * ms, epsilon = 1e-8);
        }
    }

    #[test]
    fn sector_zero_enumeration_moments_on_2x2() {
        // Exhaustive over the 6 zero-sector states: <Ms^2> = 4/3 in
        // spin-1/2 units (16/3 in sigma units, the (pi,pi) mode value) and
        // the Binder ratio is 3.
        let lat = Lattice::square(2).unwrap();
        let mut sum2 = 0.0;
        let mut sum4 = 0.0;
        let mut count = 0;
        for idx in 0..16usize {
            if idx.count_ones() == 2 {
                let cfg = SpinConfiguration::from_basis_index(4, idx);
                let (_, m2, m4) = staggered_moments(&lat, &cfg, Convention::SpinHalf);
                sum2 += m2;
                sum4 += m4;
                count += 1;
            }
        }
        assert_eq!(count, 6);
        let mean2 = sum2 / 6.0;
        let mean4 = sum4 / 6.0;
        assert_relative_eq!(mean2, 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(mean4 / (mean2 * mean2), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn convention_scaling_is_exact_powers() {
        let lat = Lattice::square(4).unwrap();
        let mut rng = crate::rngstream::stream_rng(4, 0, "obs-test");
        let cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let (m_sig, m2_sig, m4_sig) = staggered_moments(&lat, &cfg, Convention::Sigma);
        let (m_h, m2_h, m4_h) = staggered_moments(&lat, &cfg, Convention::SpinHalf);
        assert_relative_eq!(m_sig, 2.0 * m_h);
        assert_relative_eq!(m2_sig, 4.0 * m2_h);
        assert_relative_eq!(m4_sig, 16.0 * m4_h);
    }

    #[test]
    fn observable_set_matches_direct_evaluation() {
        let lat = Lattice::square(4).unwrap();
        let kinds = [
            ObservableKind::Ms2(Convention::SpinHalf),
            ObservableKind::StructureFactor(1, 0),
            ObservableKind::TotalSigma,
        ];
        let set = ObservableSet::new(&lat, &kinds);
        let mut rng = crate::rngstream::stream_rng(5, 0, "obs-test");
        let cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let mut out = Vec::new();
        set.evaluate_into(&cfg, &mut out);
        let (_, ms2, _) = staggered_moments(&lat, &cfg, Convention::SpinHalf);
        assert_relative_eq!(out[0], ms2);
        let m = Momentum::from_indices(&lat, 1, 0);
        assert_relative_eq!(
            out[1],
            structure_factor(&lat, &cfg, &m, Convention::Sigma),
            epsilon = 1e-10
        );
        assert_relative_eq!(out[2], cfg.total_sigma() as f64);
    }

    #[test]
    fn fourier_modes_satisfy_parseval() {
        // sum_p |S~(p)|^2 = N * sum_x sigma_x^2 = N^2 for sigma = +/-1.
        let lat = Lattice::square(4).unwrap();
        let grid = MomentumGrid::new(&lat);
        let mut rng = crate::rngstream::stream_rng(6, 0, "obs-test");
        let cfg = SpinConfiguration::random_uniform(lat.n_sites(), &mut rng);
        let total: f64 = fourier_modes(&lat, &cfg, &grid, Convention::Sigma)
            .iter()
            .sum();
        let n = lat.n_sites() as f64;
        assert_relative_eq!(total, n * n, epsilon = 1e-8 * n * n);
    }

    #[test]
    fn parse_round_trip() {
        for text in [
            "ms",
            "ms2:sigma",
            "ms4:spin_half",
            "sf:1,0",
            "sf:2,15",
            "stot",
        ] {
            let kind = ObservableKind::parse(text).unwrap();
            let again = ObservableKind::parse(text).unwrap();
            assert_eq!(kind, again);
        }
        assert!(ObservableKind::parse("nope").is_err());
        assert!(ObservableKind::parse("sf:x,y").is_err());
        assert!(ObservableKind::parse("ms:bad").is_err());
    }
}
