//! Continuous-time evolution under the measurement Lindbladian.
//!
//! Small systems (superoperator dimension within the dense cap) are solved
//! by exact exponentiation of the real-symmetric generator; larger oracle
//! systems fall back to an embedded Runge-Kutta integrator with local error
//! control of 1e-9 per unit gamma*t.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{lindblad_generator, LindbladGenerator, SUPEROP_DENSE_CAP};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

use super::{DensityMatrix, DiagonalObservable, OracleSeries};

/// Local truncation error budget per unit gamma*t for the adaptive path.
pub const LINDBLAD_LOCAL_TOL: f64 = 1e-9;

/// Evolve `rho0` under `drho/dt = gamma sum_b (sum_o P_o rho P_o - rho)` and
/// record the observables at the requested times (must be non-decreasing,
/// starting at or after 0).
pub fn evolve_lindblad(
    rho0: &DensityMatrix,
    lat: &Lattice,
    gamma: f64,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> Result<OracleSeries> {
    validate_grid(grid)?;
    if gamma < 0.0 {
        return Err(Error::config("gamma must be non-negative"));
    }
    let gen = lindblad_generator(lat, gamma)?;
    let dim = rho0.dim();
    if dim * dim <= SUPEROP_DENSE_CAP {
        evolve_by_exponentiation(rho0, &gen, grid, observables)
    } else {
        evolve_by_integration(rho0, &gen, grid, observables)
    }
}

/// Force the adaptive integrator regardless of system size; used to
/// cross-validate the two routes.
pub fn evolve_lindblad_integrated(
    rho0: &DensityMatrix,
    lat: &Lattice,
    gamma: f64,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> Result<OracleSeries> {
    validate_grid(grid)?;
    let gen = lindblad_generator(lat, gamma)?;
    evolve_by_integration(rho0, &gen, grid, observables)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config("time grid must not be empty"));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("time grid must be non-negative and sorted"));
    }
    Ok(())
}

fn evolve_by_exponentiation(
    rho0: &DensityMatrix,
    gen: &LindbladGenerator,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> Result<OracleSeries> {
    let dim = rho0.dim();
    let sdim = dim * dim;
    let dense = gen.to_dense()?;
    let eig = SymmetricEigen::new(dense);
    // Column-major vectorization of rho0, split into real and imaginary parts.
    let vec_re = DVector::<f64>::from_iterator(sdim, rho0.matrix().iter().map(|z| z.re));
    let vec_im = DVector::<f64>::from_iterator(sdim, rho0.matrix().iter().map(|z| z.im));
    let coeff_re = eig.eigenvectors.transpose() * vec_re;
    let coeff_im = eig.eigenvectors.transpose() * vec_im;

    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    let mut series = OracleSeries::new(&names);
    for &t in grid {
        let scale = |c: &DVector<f64>| {
            DVector::<f64>::from_iterator(
                sdim,
                c.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(&x, &l)| x * (t * l).exp()),
            )
        };
        let out_re = &eig.eigenvectors * scale(&coeff_re);
        let out_im = &eig.eigenvectors * scale(&coeff_im);
        let rho_t = DMatrix::<Complex64>::from_iterator(
            dim,
            dim,
            out_re
                .iter()
                .zip(out_im.iter())
                .map(|(&r, &i)| Complex64::new(r, i)),
        );
        series.record(
            t,
            observables
                .iter()
                .map(|o| (0..dim).map(|s| o.values[s] * rho_t[(s, s)].re).sum()),
        );
    }
    Ok(series)
}

// Cash-Karp embedded Runge-Kutta 4(5) coefficients.
const CK_A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const CK_B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const CK_B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

fn evolve_by_integration(
    rho0: &DensityMatrix,
    gen: &LindbladGenerator,
    grid: &[f64],
    observables: &[DiagonalObservable],
) -> Result<OracleSeries> {
    let dim = rho0.dim();
    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    let mut series = OracleSeries::new(&names);
    let gamma = gen.gamma().max(f64::MIN_POSITIVE);
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0f64;
    let mut h = (0.05 / gamma).min(grid.last().copied().unwrap_or(1.0).max(1e-3));
    let mut steps_taken = 0usize;
    const MAX_STEPS: usize = 2_000_000;

    let record = |series: &mut OracleSeries, t: f64, rho: &DMatrix<Complex64>| {
        series.record(
            t,
            observables
                .iter()
                .map(|o| (0..dim).map(|s| o.values[s] * rho[(s, s)].re).sum()),
        );
    };

    for &target in grid {
        while t < target {
            let mut step = h.min(target - t);
            loop {
                steps_taken += 1;
                if steps_taken > MAX_STEPS {
                    return Err(Error::numerical(format!(
                        "Lindblad integrator exceeded {MAX_STEPS} steps at t={t}, h={step:e}"
                    )));
                }
                let (next, err) = cash_karp_step(gen, &rho, step);
                let tol = LINDBLAD_LOCAL_TOL * gamma * step;
                if err <= tol || step <= 1e-14 {
                    rho = next;
                    t += step;
                    let grow = if err > 0.0 {
                        0.9 * (tol / err).powf(0.2)
                    } else {
                        5.0
                    };
                    h = (step * grow.clamp(0.2, 5.0)).max(1e-12);
                    break;
                }
                step *= (0.9 * (tol / err).powf(0.25)).clamp(0.1, 0.9);
            }
        }
        record(&mut series, target, &rho);
    }
    Ok(series)
}

fn cash_karp_step(
    gen: &LindbladGenerator,
    rho: &DMatrix<Complex64>,
    h: f64,
) -> (DMatrix<Complex64>, f64) {
    let mut k: Vec<DMatrix<Complex64>> = Vec::with_capacity(6);
    k.push(gen.apply(rho));
    for stage in 0..5 {
        let mut arg = rho.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = CK_A[stage][j];
            if a != 0.0 {
                arg += kj * Complex64::new(a * h, 0.0);
            }
        }
        k.push(gen.apply(&arg));
    }
    let mut out = rho.clone();
    let mut err_mat = DMatrix::<Complex64>::zeros(rho.nrows(), rho.ncols());
    for (j, kj) in k.iter().enumerate() {
        out += kj * Complex64::new(CK_B5[j] * h, 0.0);
        err_mat += kj * Complex64::new((CK_B5[j] - CK_B4[j]) * h, 0.0);
    }
    let err = err_mat.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    (out, err)
}
