//! Stochastic series expansion sampler for the spin-1/2 Heisenberg
//! antiferromagnet, producing sigma^3-basis configurations distributed as
//! the diagonal of exp(-beta H)/Z.
//!
//! The expansion uses the standard bond decomposition H_b = (1/4 - Sz Sz)
//! (diagonal) and (S+S- + S-S+)/2 (off-diagonal), both with matrix element
//! 1/2 on antiparallel pairs. On a bipartite lattice the off-diagonal sign
//! is removed by the usual sublattice rotation about the z-axis; sigma^3
//! configurations are unaffected by that rotation, so samples need no
//! back-transformation. Loop updates use the deterministic switch-and-
//! reverse rule of the isotropic point: a loop entering any vertex leg
//! exits at the other leg on the same side, toggling diagonal and
//! off-diagonal vertices. Every leg belongs to exactly one loop and each
//! loop is flipped with probability 1/2.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::spins::SpinConfiguration;

const IDENTITY: u32 = 0;

#[inline]
fn encode_op(bond: u32, off_diagonal: bool) -> u32 {
    ((bond + 1) << 1) | off_diagonal as u32
}

#[inline]
fn op_bond(code: u32) -> u32 {
    (code >> 1) - 1
}

#[inline]
fn op_is_off_diagonal(code: u32) -> bool {
    code & 1 == 1
}

/// Warm-up diagnostics recorded by [`thermalize`].
#[derive(Debug, Clone, Default)]
pub struct ThermalDiagnostics {
    pub warmup_sweeps: usize,
    pub mean_expansion_order: f64,
    pub final_cutoff: usize,
    /// Integrated autocorrelation time of the staggered magnetization
    /// squared, in sweeps, estimated over the warm-up tail.
    pub tau_int_ms2: f64,
}

/// SSE sampler state for one Markov chain.
pub struct ThermalSampler {
    lat: Lattice,
    beta_j: f64,
    spins: Vec<i8>,
    ops: Vec<u32>,
    n_ops: usize,
    rng: ChaCha8Rng,
    sample_spacing: usize,
    sweeps_done: u64,
    diagnostics: ThermalDiagnostics,
    // scratch buffers reused across sweeps
    work_spins: Vec<i8>,
    vert_bond: Vec<u32>,
    vert_slot: Vec<u32>,
    leg_spin: Vec<i8>,
    link: Vec<u32>,
    first_leg: Vec<i32>,
    last_leg: Vec<i32>,
    visited: Vec<bool>,
}

/// Default warm-up length: `max(1000, 10 * betaJ * N_sites)` sweeps.
pub fn default_warmup(lat: &Lattice, beta_j: f64) -> usize {
    (10.0 * beta_j * lat.n_sites() as f64).ceil().max(1000.0) as usize
}

/// Build and equilibrate a sampler chain. `n_warm = 0` selects the default
/// warm-up floor.
pub fn thermalize(
    lat: &Lattice,
    beta_j: f64,
    rng: ChaCha8Rng,
    n_warm: usize,
) -> Result<ThermalSampler> {
    let mut sampler = ThermalSampler::new(lat, beta_j, rng)?;
    let n_warm = if n_warm == 0 {
        default_warmup(lat, beta_j)
    } else {
        n_warm
    };
    sampler.warm_up(n_warm);
    Ok(sampler)
}

impl ThermalSampler {
    pub fn new(lat: &Lattice, beta_j: f64, mut rng: ChaCha8Rng) -> Result<Self> {
        if beta_j <= 0.0 {
            return Err(Error::config("betaJ must be positive"));
        }
        if !lat.is_bipartite() {
            return Err(Error::config(
                "SSE sampler requires a bipartite lattice (even or length-1 dimensions)",
            ));
        }
        if lat.n_bonds() == 0 {
            return Err(Error::config("lattice has no bonds to sample"));
        }
        let n_sites = lat.n_sites();
        let spins: Vec<i8> = (0..n_sites)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let cutoff = ((beta_j * lat.n_bonds() as f64).ceil() as usize).max(20);
        Ok(ThermalSampler {
            lat: lat.clone(),
            beta_j,
            spins,
            ops: vec![IDENTITY; cutoff],
            n_ops: 0,
            rng,
            sample_spacing: 2,
            sweeps_done: 0,
            diagnostics: ThermalDiagnostics::default(),
            work_spins: vec![0; n_sites],
            vert_bond: Vec::new(),
            vert_slot: Vec::new(),
            leg_spin: Vec::new(),
            link: Vec::new(),
            first_leg: vec![-1; n_sites],
            last_leg: vec![-1; n_sites],
            visited: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn beta_j(&self) -> f64 {
        self.beta_j
    }

    pub fn expansion_order(&self) -> usize {
        self.n_ops
    }

    pub fn cutoff(&self) -> usize {
        self.ops.len()
    }

    pub fn diagnostics(&self) -> &ThermalDiagnostics {
        &self.diagnostics
    }

    /// Sweeps between successive configuration samples (default 2).
    pub fn set_sample_spacing(&mut self, spacing: usize) {
        self.sample_spacing = spacing.max(1);
    }

    /// Current sigma^3 slice of the operator-string configuration.
    pub fn configuration(&self) -> SpinConfiguration {
        SpinConfiguration::new(self.spins.clone())
    }

    fn warm_up(&mut self, n_warm: usize) {
        let window = n_warm.min(2000);
        let mut ms2_tail: Vec<f64> = Vec::with_capacity(window);
        let mut order_sum = 0usize;
        for sweep in 0..n_warm {
            self.sweep();
            order_sum += self.n_ops;
            if sweep + window >= n_warm {
                let m: i64 = self
                    .spins
                    .iter()
                    .enumerate()
                    .map(|(s, &v)| self.lat.staggered_sign(s) * v as i64)
                    .sum();
                ms2_tail.push((m * m) as f64);
            }
        }
        self.diagnostics = ThermalDiagnostics {
            warmup_sweeps: n_warm,
            mean_expansion_order: order_sum as f64 / n_warm.max(1) as f64,
            final_cutoff: self.ops.len(),
            tau_int_ms2: integrated_autocorrelation(&ms2_tail),
        };
    }

    /// Advance the chain by the sample spacing and return a configuration.
    pub fn sample_configuration(&mut self) -> SpinConfiguration {
        for _ in 0..self.sample_spacing {
            self.sweep();
        }
        self.configuration()
    }

    /// Sample until the configuration lands in the requested total-sigma
    /// sector. Spacing sweeps are applied before every attempt.
    pub fn sample_in_sector(
        &mut self,
        sector: i64,
        max_attempts: usize,
    ) -> Result<SpinConfiguration> {
        for _ in 0..max_attempts {
            let cfg = self.sample_configuration();
            if cfg.total_sigma() == sector {
                return Ok(cfg);
            }
        }
        Err(Error::numerical(format!(
            "no configuration in sector {sector} after {max_attempts} attempts"
        )))
    }

    /// Jackknife-binned estimate of a diagonal observable over `n_samples`
    /// fresh samples. Uses 20 bins; fails if fewer than 2 samples per bin.
    pub fn estimate_thermal_observable(
        &mut self,
        observable: impl Fn(&SpinConfiguration) -> f64,
        n_samples: usize,
    ) -> Result<(f64, f64)> {
        const BINS: usize = 20;
        if n_samples < 2 * BINS {
            return Err(Error::config(format!(
                "need at least {} samples for {BINS} jackknife bins",
                2 * BINS
            )));
        }
        let mut bin_sum = [0.0f64; BINS];
        let mut bin_count = [0usize; BINS];
        for i in 0..n_samples {
            let cfg = self.sample_configuration();
            let bin = i * BINS / n_samples;
            bin_sum[bin] += observable(&cfg);
            bin_count[bin] += 1;
        }
        Ok(jackknife_mean_err(&bin_sum, &bin_count))
    }

    /// One full Monte Carlo sweep: a diagonal update pass, the deterministic
    /// loop decomposition with probability-1/2 flips, free-spin flips, and
    /// cutoff adjustment.
    pub fn sweep(&mut self) {
        self.diagonal_update();
        self.loop_update();
        self.adjust_cutoff();
        self.sweeps_done += 1;
    }

    /// Total sweeps performed since construction (including warm-up).
    pub fn total_sweeps(&self) -> u64 {
        self.sweeps_done
    }

    fn diagonal_update(&mut self) {
        let n_bonds = self.lat.n_bonds();
        let weight = self.beta_j * n_bonds as f64 / 2.0;
        self.work_spins.copy_from_slice(&self.spins);
        let m_total = self.ops.len();
        for slot in 0..m_total {
            let code = self.ops[slot];
            if code == IDENTITY {
                let free = (m_total - self.n_ops) as f64;
                let accept = weight / free;
                if accept >= 1.0 || self.rng.random::<f64>() < accept {
                    let bond = self.rng.random_range(0..n_bonds);
                    let b = self.lat.bond(bond);
                    if self.work_spins[b.a] != self.work_spins[b.b] {
                        self.ops[slot] = encode_op(bond as u32, false);
                        self.n_ops += 1;
                    }
                }
            } else if !op_is_off_diagonal(code) {
                let accept = (m_total - self.n_ops + 1) as f64 / weight;
                if accept >= 1.0 || self.rng.random::<f64>() < accept {
                    self.ops[slot] = IDENTITY;
                    self.n_ops -= 1;
                }
            } else {
                let b = self.lat.bond(op_bond(code) as usize);
                self.work_spins[b.a] = -self.work_spins[b.a];
                self.work_spins[b.b] = -self.work_spins[b.b];
            }
        }
    }

    fn loop_update(&mut self) {
        let n_sites = self.lat.n_sites();
        self.vert_bond.clear();
        self.vert_slot.clear();
        self.first_leg.fill(-1);
        self.last_leg.fill(-1);

        // Build vertex list, leg spins and vertical links.
        self.work_spins.copy_from_slice(&self.spins);
        self.leg_spin.clear();
        for (slot, &code) in self.ops.iter().enumerate() {
            if code == IDENTITY {
                continue;
            }
            let v = self.vert_bond.len();
            let bond_id = op_bond(code);
            self.vert_bond.push(bond_id);
            self.vert_slot.push(slot as u32);
            let b = self.lat.bond(bond_id as usize);
            let base = (4 * v) as u32;
            self.leg_spin.push(self.work_spins[b.a]);
            self.leg_spin.push(self.work_spins[b.b]);
            if op_is_off_diagonal(code) {
                self.work_spins[b.a] = -self.work_spins[b.a];
                self.work_spins[b.b] = -self.work_spins[b.b];
            }
            self.leg_spin.push(self.work_spins[b.a]);
            self.leg_spin.push(self.work_spins[b.b]);

            self.link.resize(4 * v + 4, u32::MAX);
            for (site, bottom, top) in [(b.a, base, base + 2), (b.b, base + 1, base + 3)] {
                if self.last_leg[site] >= 0 {
                    let prev = self.last_leg[site] as u32;
                    self.link[prev as usize] = bottom;
                    self.link[bottom as usize] = prev;
                } else {
                    self.first_leg[site] = bottom as i32;
                }
                self.last_leg[site] = top as i32;
            }
        }
        // Periodic closure in imaginary time.
        for site in 0..n_sites {
            if self.first_leg[site] >= 0 {
                let first = self.first_leg[site] as u32;
                let last = self.last_leg[site] as u32;
                self.link[last as usize] = first;
                self.link[first as usize] = last;
            }
        }

        // Trace every loop once; flip with probability 1/2.
        let n_legs = self.leg_spin.len();
        self.visited.clear();
        self.visited.resize(n_legs, false);
        for start in 0..n_legs {
            if self.visited[start] {
                continue;
            }
            let flip = self.rng.random::<bool>();
            let mut leg = start;
            loop {
                let partner = leg ^ 1;
                self.visited[leg] = true;
                self.visited[partner] = true;
                if flip {
                    self.leg_spin[leg] = -self.leg_spin[leg];
                    self.leg_spin[partner] = -self.leg_spin[partner];
                }
                leg = self.link[partner] as usize;
                if leg == start {
                    break;
                }
            }
        }

        // Write back operator types from the flipped leg spins.
        for v in 0..self.vert_bond.len() {
            let base = 4 * v;
            let diagonal = self.leg_spin[base] == self.leg_spin[base + 2]
                && self.leg_spin[base + 1] == self.leg_spin[base + 3];
            debug_assert_ne!(self.leg_spin[base], self.leg_spin[base + 1]);
            self.ops[self.vert_slot[v] as usize] = encode_op(self.vert_bond[v], !diagonal);
        }

        // Update the stored slice-0 spins; sites without operators are free.
        for site in 0..n_sites {
            if self.first_leg[site] >= 0 {
                self.spins[site] = self.leg_spin[self.first_leg[site] as usize];
            } else if self.rng.random::<bool>() {
                self.spins[site] = -self.spins[site];
            }
        }
    }

    fn adjust_cutoff(&mut self) {
        let m_total = self.ops.len();
        if self.n_ops * 5 > m_total * 4 {
            let new_len = (self.n_ops * 5) / 4 + 2;
            self.ops.resize(new_len, IDENTITY);
        }
    }

    /// Propagating the stored state through the full operator string must
    /// return the starting state (periodicity in imaginary time). Also
    /// checks that every operator sits on an antiparallel pair and that the
    /// off-diagonal count is even — on the bipartite lattice that parity is
    /// exactly what makes all accepted string weights non-negative after
    /// the sublattice rotation.
    pub fn check_periodicity(&self) -> bool {
        let mut w = self.spins.clone();
        let mut off_diagonal = 0usize;
        for &code in &self.ops {
            if code == IDENTITY {
                continue;
            }
            let b = self.lat.bond(op_bond(code) as usize);
            if w[b.a] == w[b.b] {
                return false; // operators act on antiparallel pairs only
            }
            if op_is_off_diagonal(code) {
                off_diagonal += 1;
                w[b.a] = -w[b.a];
                w[b.b] = -w[b.b];
            }
        }
        w == self.spins && off_diagonal % 2 == 0
    }

    /// Energy per the SSE estimator `<H> = J N_b / 4 - <n> / beta`, measured
    /// over fresh samples. Used for cross-checks against exact values.
    pub fn estimate_energy(&mut self, n_samples: usize) -> Result<(f64, f64)> {
        let n_bonds = self.lat.n_bonds() as f64;
        let beta = self.beta_j;
        const BINS: usize = 20;
        if n_samples < 2 * BINS {
            return Err(Error::config("too few samples for the energy estimate"));
        }
        let mut bin_sum = [0.0f64; BINS];
        let mut bin_count = [0usize; BINS];
        for i in 0..n_samples {
            for _ in 0..self.sample_spacing {
                self.sweep();
            }
            let bin = i * BINS / n_samples;
            bin_sum[bin] += self.n_ops as f64;
            bin_count[bin] += 1;
        }
        let (mean_n, err_n) = jackknife_mean_err(&bin_sum, &bin_count);
        Ok((n_bonds / 4.0 - mean_n / beta, err_n / beta))
    }
}

/// A labeled thermal sample: which chain produced it and at which cumulative
/// sweep index.
#[derive(Debug, Clone)]
pub struct ThermalSample {
    pub chain: u64,
    pub sweep_index: u64,
    pub configuration: SpinConfiguration,
}

/// Specification of a thermal ensemble draw over independent chains.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub beta_j: f64,
    /// Number of independent chains; fixed by configuration (never by the
    /// worker count) so results do not depend on available parallelism.
    pub chains: usize,
    /// 0 selects the default warm-up floor.
    pub warmup: usize,
    pub sample_spacing: usize,
    pub n_samples: usize,
    /// Restrict samples to one total-sigma sector by resampling.
    pub sector_filter: Option<i64>,
    pub master_seed: u64,
}

/// Draw `n_samples` configurations from `diag(exp(-beta H))/Z` using
/// `chains` independent SSE chains. Sample `r` comes from chain
/// `r % chains`; the output order is deterministic for a given spec.
pub fn sample_ensemble(lat: &Lattice, spec: &EnsembleSpec) -> Result<Vec<ThermalSample>> {
    if spec.chains == 0 || spec.n_samples == 0 {
        return Err(Error::config("chains and n_samples must be positive"));
    }
    let chains = spec.chains.min(spec.n_samples);
    let per_chain: Vec<usize> = (0..chains)
        .map(|c| spec.n_samples / chains + usize::from(c < spec.n_samples % chains))
        .collect();

    let run_chain = |chain: usize| -> Result<Vec<ThermalSample>> {
        let rng = crate::rngstream::stream_rng(spec.master_seed, chain as u64, "thermal");
        let mut sampler = thermalize(lat, spec.beta_j, rng, spec.warmup)?;
        sampler.set_sample_spacing(spec.sample_spacing);
        let mut out = Vec::with_capacity(per_chain[chain]);
        for _ in 0..per_chain[chain] {
            let configuration = match spec.sector_filter {
                None => sampler.sample_configuration(),
                Some(sector) => sampler.sample_in_sector(sector, 1_000_000)?,
            };
            out.push(ThermalSample {
                chain: chain as u64,
                sweep_index: sampler.total_sweeps(),
                configuration,
            });
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let per_chain_samples: Vec<Vec<ThermalSample>> = {
        use rayon::prelude::*;
        (0..chains)
            .into_par_iter()
            .map(run_chain)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_chain_samples: Vec<Vec<ThermalSample>> =
        { (0..chains).map(run_chain).collect::<Result<_>>()? };

    let mut out = Vec::with_capacity(spec.n_samples);
    for r in 0..spec.n_samples {
        out.push(per_chain_samples[r % chains][r / chains].clone());
    }
    Ok(out)
}

/// Leave-one-out jackknife mean and error from per-bin sums and counts.
pub fn jackknife_mean_err(bin_sum: &[f64], bin_count: &[usize]) -> (f64, f64) {
    let bins = bin_sum.len();
    let total: f64 = bin_sum.iter().sum();
    let count: usize = bin_count.iter().sum();
    let mean = total / count as f64;
    let mut sq_dev = 0.0;
    for b in 0..bins {
        let rest = (total - bin_sum[b]) / (count - bin_count[b]) as f64;
        sq_dev += (rest - mean) * (rest - mean);
    }
    let err = ((bins as f64 - 1.0) / bins as f64 * sq_dev).sqrt();
    (mean, err)
}

fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return f64::NAN;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for k in 1..n / 4 {
        let mut acf = 0.0;
        for i in 0..n - k {
            acf += (series[i] - mean) * (series[i + k] - mean);
        }
        acf /= (n - k) as f64 * var;
        if acf <= 0.0 {
            break;
        }
        tau += acf;
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{build_hamiltonian, thermal_density_matrix, DiagonalObservable};
    use crate::rngstream::stream_rng;

    fn ms2_sigma(lat: &Lattice, cfg: &SpinConfiguration) -> f64 {
        let m: i64 = (0..lat.n_sites())
            .map(|s| lat.staggered_sign(s) * cfg.get(s) as i64)
            .sum();
        (m * m) as f64
    }

    #[test]
    fn acceptance_ratios_satisfy_detailed_balance() {
        // Insert/remove acceptance probabilities must reproduce the exact
        // weight ratio W(n+1)/W(n) = (betaJ/2) / (M - n) per bond choice.
        for &(beta_j, n_bonds, m_total, n) in &[
            (0.7, 8usize, 40usize, 3usize),
            (2.5, 32, 200, 150),
            (10.0, 4, 60, 20),
        ] {
            let weight = beta_j * n_bonds as f64 / 2.0;
            let p_ins = (weight / (m_total - n) as f64).min(1.0) / n_bonds as f64;
            let p_rem = ((m_total - n) as f64 / weight).min(1.0);
            let flow_ratio = p_ins / p_rem;
            let weight_ratio = (beta_j / 2.0) / (m_total - n) as f64;
            assert!(
                (flow_ratio - weight_ratio).abs() < 1e-12,
                "betaJ={beta_j} Nb={n_bonds} M={m_total} n={n}"
            );
        }
    }

    #[test]
    fn periodicity_invariant_holds_through_sweeps() {
        let lat = Lattice::square(4).unwrap();
        let rng = stream_rng(11, 0, "sse-test");
        let mut sampler = ThermalSampler::new(&lat, 1.5, rng).unwrap();
        for _ in 0..200 {
            sampler.sweep();
            assert!(sampler.check_periodicity());
        }
    }

    #[test]
    fn infinite_temperature_limit_is_uniform() {
        let lat = Lattice::square(4).unwrap();
        let rng = stream_rng(12, 0, "sse-test");
        let mut sampler = thermalize(&lat, 0.01, rng, 1000).unwrap();
        let n = 4000;
        let mut sum_ms2 = 0.0;
        for _ in 0..n {
            let cfg = sampler.sample_configuration();
            sum_ms2 += ms2_sigma(&lat, &cfg);
        }
        // Independent spins: <Ms^2> = N = 16 in sigma units; per-sample
        // std is about sqrt(2) * N.
        let mean = sum_ms2 / n as f64;
        let tol = 5.0 * (2.0f64).sqrt() * 16.0 / (n as f64).sqrt();
        assert!((mean - 16.0).abs() < tol, "mean={mean}");
    }

    #[test]
    fn two_site_energy_matches_exact() {
        let lat = Lattice::single_pair();
        let beta = 2.0;
        let rng = stream_rng(13, 0, "sse-test");
        let mut sampler = thermalize(&lat, beta, rng, 2000).unwrap();
        let (e, err) = sampler.estimate_energy(4000).unwrap();
        let z = (0.75f64 * beta).exp() + 3.0 * (-0.25f64 * beta).exp();
        let exact = (-0.75 * (0.75f64 * beta).exp() + 0.75 * (-0.25f64 * beta).exp()) / z;
        assert!(
            (e - exact).abs() < 4.0 * err.max(1e-3),
            "sse {e} +- {err}, exact {exact}"
        );
    }

    #[test]
    fn small_lattice_ms2_matches_oracle() {
        let lat = Lattice::square(2).unwrap();
        let beta = 1.0;
        let rng = stream_rng(14, 0, "sse-test");
        let mut sampler = thermalize(&lat, beta, rng, 2000).unwrap();
        let lat2 = lat.clone();
        let (mean, err) = sampler
            .estimate_thermal_observable(move |cfg| ms2_sigma(&lat2, cfg), 6000)
            .unwrap();

        let h = build_hamiltonian(&lat, 1.0).unwrap();
        let rho = thermal_density_matrix(&h, beta).unwrap();
        let lat3 = lat.clone();
        let obs = DiagonalObservable::from_fn(lat.n_sites(), "ms2", move |c| ms2_sigma(&lat3, c));
        let exact = obs.expectation(&rho);
        assert!(
            (mean - exact).abs() < 3.0 * err.max(1e-3),
            "sse {mean} +- {err}, oracle {exact}"
        );
    }

    #[test]
    fn total_sigma_histogram_is_flip_symmetric() {
        let lat = Lattice::square(2).unwrap();
        let rng = stream_rng(16, 0, "sse-test");
        let mut sampler = thermalize(&lat, 1.0, rng, 1000).unwrap();
        let n = 20000;
        let mut pos = 0i64;
        let mut neg = 0i64;
        for _ in 0..n {
            let m = sampler.sample_configuration().total_sigma();
            if m > 0 {
                pos += 1;
            } else if m < 0 {
                neg += 1;
            }
        }
        let total = (pos + neg) as f64;
        let asym = (pos - neg) as f64 / total.max(1.0);
        assert!(asym.abs() < 5.0 / total.sqrt(), "asymmetry {asym}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let lat = Lattice::square(2).unwrap();
        assert!(ThermalSampler::new(&lat, 0.0, stream_rng(1, 0, "t")).is_err());
        let odd = Lattice::rect(2, 3).unwrap();
        assert!(ThermalSampler::new(&odd, 1.0, stream_rng(1, 0, "t")).is_err());
    }

    #[test]
    fn sector_sampling_respects_filter() {
        let lat = Lattice::square(2).unwrap();
        let rng = stream_rng(15, 0, "sse-test");
        let mut sampler = thermalize(&lat, 1.0, rng, 500).unwrap();
        let cfg = sampler.sample_in_sector(0, 10_000).unwrap();
        assert_eq!(cfg.total_sigma(), 0);
    }
}
