//! Observable computation and quantitative analysis: staggered moments,
//! Fourier modes, Binder ratios, and the equilibration / finite-size fits.

pub mod fit;
pub mod observables;
pub mod series;
pub mod stats;

use crate::error::{Error, Result};
use series::TimeSeries;

/// Binder ratio `<Ms^4> / <Ms^2>^2` from two aligned series, with first-order
/// error propagation (ignoring the Ms^2/Ms^4 correlation; prefer the
/// jackknife path through `EnsembleResult::binder_mean_err` when the binned
/// sums are available). Zero-denominator points are dropped and reported.
pub fn binder_ratio(ms2: &TimeSeries, ms4: &TimeSeries) -> Result<(TimeSeries, Vec<String>)> {
    if ms2.points.len() != ms4.points.len()
        || ms2
            .points
            .iter()
            .zip(&ms4.points)
            .any(|(a, b)| a.time != b.time)
    {
        return Err(Error::config("Binder ratio needs aligned time grids"));
    }
    let mut out = TimeSeries::new("binder", ms2.convention, ms2.time_unit);
    let mut flags = Vec::new();
    for (p2, p4) in ms2.points.iter().zip(&ms4.points) {
        if p2.mean <= 0.0 {
            flags.push(format!("t={}: <Ms^2> <= 0, point undefined", p2.time));
            continue;
        }
        let ratio = p4.mean / (p2.mean * p2.mean);
        let rel2 = p2.err / p2.mean;
        let rel4 = if p4.mean != 0.0 {
            p4.err / p4.mean
        } else {
            0.0
        };
        let err = ratio.abs() * (rel4 * rel4 + 4.0 * rel2 * rel2).sqrt();
        out.push(p2.time, ratio, err, p2.n.min(p4.n));
    }
    Ok((out, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::observables::Convention;
    use crate::analysis::series::TimeUnit;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn binder_of_delta_distribution_is_one() {
        let mut ms2 = TimeSeries::new("ms2", Convention::SpinHalf, TimeUnit::Rounds);
        let mut ms4 = TimeSeries::new("ms4", Convention::SpinHalf, TimeUnit::Rounds);
        // Perfectly ordered: Ms = m always -> <Ms^4> = <Ms^2>^2.
        for t in 0..5 {
            ms2.push(t as f64, 64.0, 0.0, 100);
            ms4.push(t as f64, 4096.0, 0.0, 100);
        }
        let (ratio, flags) = binder_ratio(&ms2, &ms4).unwrap();
        assert!(flags.is_empty());
        for p in &ratio.points {
            assert_relative_eq!(p.mean, 1.0);
        }
    }

    #[test]
    fn binder_of_gaussian_is_three() {
        let mut rng = crate::rngstream::stream_rng(51, 0, "analysis-test");
        let n = 2_000_000usize;
        let mut s2 = 0.0f64;
        let mut s4 = 0.0f64;
        for _ in 0..n {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            let g = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            s2 += g * g;
            s4 += g * g * g * g;
        }
        let m2 = s2 / n as f64;
        let m4 = s4 / n as f64;
        let binder = m4 / (m2 * m2);
        assert!((binder - 3.0).abs() < 0.02, "binder={binder}");
    }

    #[test]
    fn binder_flags_zero_denominator() {
        let mut ms2 = TimeSeries::new("ms2", Convention::SpinHalf, TimeUnit::Rounds);
        let mut ms4 = TimeSeries::new("ms4", Convention::SpinHalf, TimeUnit::Rounds);
        ms2.push(0.0, 0.0, 0.0, 10);
        ms4.push(0.0, 0.0, 0.0, 10);
        ms2.push(1.0, 2.0, 0.1, 10);
        ms4.push(1.0, 8.0, 0.4, 10);
        let (ratio, flags) = binder_ratio(&ms2, &ms4).unwrap();
        assert_eq!(ratio.points.len(), 1);
        assert_eq!(flags.len(), 1);
    }
}
