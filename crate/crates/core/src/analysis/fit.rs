//! Weighted least-squares fitting: the exponential approach to the steady
//! state, the diffusive power law, the finite-size form of the staggered
//! order parameter, and the order-parameter decay.
//!
//! Nonlinear models go through a small Levenberg-Marquardt loop with
//! analytic Jacobians and deterministic initialization; the log-linear
//! models are solved in closed form. Fits are weighted by inverse variance
//! and parameter errors come from the curvature at the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::stats::chi_squared_pvalue;
use crate::error::{Error, Result};
use crate::lattice::Momentum;

/// Finite-size expansion constants of the staggered structure factor,
/// fixed inputs (not refit): c0..c3.
pub const FINITE_SIZE_COEFFS: [f64; 4] = [1.0, 5.7503, 16.31, -84.8];

/// A fitted parameter with its 1-sigma error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

/// Fit output: estimates, goodness of fit, window, and any flags raised.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_dof: f64,
    pub p_value: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// Normalization convention of the fitted series, stamped by callers
    /// that know it (the fits themselves are convention-agnostic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<crate::analysis::observables::Convention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map(|p| p.value).unwrap_or(f64::NAN)
    }

    pub fn error(&self, name: &str) -> f64 {
        self.param(name).map(|p| p.error).unwrap_or(f64::NAN)
    }

    fn finish(
        model: &str,
        names: &[&str],
        values: &[f64],
        errors: &[f64],
        chi2: f64,
        n_points: usize,
        window: (f64, f64),
        flags: Vec<String>,
    ) -> FitResult {
        let dof = n_points.saturating_sub(names.len());
        let chi2_dof = if dof > 0 { chi2 / dof as f64 } else { f64::NAN };
        FitResult {
            model: model.to_string(),
            params: names
                .iter()
                .zip(values)
                .zip(errors)
                .map(|((&name, &value), &error)| FitParam {
                    name: name.to_string(),
                    value,
                    error,
                })
                .collect(),
            chi2,
            dof,
            chi2_dof,
            p_value: if dof > 0 {
                chi_squared_pvalue(chi2, dof)
            } else {
                f64::NAN
            },
            window,
            n_points,
            convention: None,
            flags,
        }
    }
}

/// One weighted data point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub err: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64, err: f64) -> Self {
        DataPoint { x, y, err }
    }

    fn weight(&self) -> f64 {
        if self.err > 0.0 {
            1.0 / (self.err * self.err)
        } else {
            1.0
        }
    }
}

/// Inclusive fit window on the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn all() -> Self {
        Window {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        Window { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn clip(&self, data: &[DataPoint]) -> Vec<DataPoint> {
        data.iter()
            .copied()
            .filter(|p| self.contains(p.x))
            .collect()
    }

    fn actual(&self, data: &[DataPoint]) -> (f64, f64) {
        let lo = data.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = data.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Weighted linear regression y = a + b x; returns (a, b, var_a, var_b, chi2).
fn weighted_linear(data: &[(f64, f64, f64)]) -> Result<(f64, f64, f64, f64, f64)> {
    if data.len() < 2 {
        return Err(Error::config("linear regression needs at least 2 points"));
    }
    let mut s = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y, err) in data {
        let w = if err > 0.0 { 1.0 / (err * err) } else { 1.0 };
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = s * sxx - sx * sx;
    if delta.abs() < 1e-300 {
        return Err(Error::numerical(
            "degenerate abscissas in linear regression",
        ));
    }
    let a = (sxx * sy - sx * sxy) / delta;
    let b = (s * sxy - sx * sy) / delta;
    let chi2: f64 = data
        .iter()
        .map(|&(x, y, err)| {
            let w = if err > 0.0 { 1.0 / (err * err) } else { 1.0 };
            w * (y - a - b * x).powi(2)
        })
        .sum();
    Ok((a, b, sxx / delta, s / delta, chi2))
}

/// A nonlinear model for the Levenberg-Marquardt driver.
trait Model {
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    fn grad(&self, x: f64, p: &[f64], out: &mut [f64]);
    /// Reject parameter vectors outside the model domain.
    fn admissible(&self, p: &[f64]) -> bool;
}

fn levenberg_marquardt(
    model: &dyn Model,
    data: &[DataPoint],
    init: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n_par = init.len();
    if data.len() < n_par {
        return Err(Error::config("fewer points than parameters"));
    }
    let chi2_of = |p: &[f64]| -> f64 {
        data.iter()
            .map(|d| {
                let r = d.y - model.eval(d.x, p);
                d.weight() * r * r
            })
            .sum()
    };
    let mut params = init.to_vec();
    if !model.admissible(&params) {
        return Err(Error::numerical("inadmissible initial fit parameters"));
    }
    let mut chi2 = chi2_of(&params);
    let mut lambda = 1e-3;
    let mut grad_buf = vec![0.0; n_par];
    let mut converged = false;
    for _ in 0..300 {
        // Normal equations: (J^T W J + lambda diag) delta = J^T W r.
        let mut jtj = DMatrix::<f64>::zeros(n_par, n_par);
        let mut jtr = DVector::<f64>::zeros(n_par);
        for d in data {
            model.grad(d.x, &params, &mut grad_buf);
            let w = d.weight();
            let r = d.y - model.eval(d.x, &params);
            for i in 0..n_par {
                jtr[i] += w * grad_buf[i] * r;
                for j in 0..n_par {
                    jtj[(i, j)] += w * grad_buf[i] * grad_buf[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for i in 0..n_par {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .map(|(p, d)| p + d)
                .collect();
            if !model.admissible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let trial_chi2 = chi2_of(&trial);
            if trial_chi2 <= chi2 {
                let rel_drop = (chi2 - trial_chi2) / chi2.max(1e-300);
                params = trial;
                chi2 = trial_chi2;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_drop < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            converged = converged || !improved;
            break;
        }
    }
    if !converged && chi2.is_nan() {
        return Err(Error::numerical("fit did not converge"));
    }
    // Covariance from the undamped curvature at the optimum.
    let mut jtj = DMatrix::<f64>::zeros(n_par, n_par);
    for d in data {
        model.grad(d.x, &params, &mut grad_buf);
        let w = d.weight();
        for i in 0..n_par {
            for j in 0..n_par {
                jtj[(i, j)] += w * grad_buf[i] * grad_buf[j];
            }
        }
    }
    let errors = match jtj.clone().try_inverse() {
        Some(cov) => (0..n_par).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; n_par],
    };
    Ok((params, errors, chi2))
}

struct ExpApproach;

impl Model for ExpApproach {
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (-x / p[2]).exp()
    }
    fn grad(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let e = (-x / p[2]).exp();
        out[0] = 1.0;
        out[1] = e;
        out[2] = p[1] * e * x / (p[2] * p[2]);
    }
    fn admissible(&self, p: &[f64]) -> bool {
        p[2] > 0.0 && p.iter().all(|v| v.is_finite())
    }
}

/// Fit `y = A + B exp(-t / tau)`.
///
/// Initialization is deterministic: A from the tail mean, B from the
/// first-point residual, tau from a log-linear regression of the residuals.
pub fn fit_exponential(data: &[DataPoint], window: Window) -> Result<FitResult> {
    let pts = window.clip(data);
    if pts.len() < 6 {
        return Err(Error::config(format!(
            "exponential fit needs at least 6 points in the window, got {}",
            pts.len()
        )));
    }
    let tail = pts.len().div_ceil(4).max(2);
    let a0 = pts[pts.len() - tail..].iter().map(|p| p.y).sum::<f64>() / tail as f64;
    let b0 = pts[0].y - a0;
    let mut flags = Vec::new();

    // Residual regression for the initial decay time.
    let t0 = pts[0].x;
    let resid: Vec<(f64, f64, f64)> = pts
        .iter()
        .filter(|p| (p.y - a0).abs() > 0.05 * b0.abs() && (p.y - a0) * b0 > 0.0)
        .map(|p| (p.x, ((p.y - a0) / b0).ln(), p.err / (p.y - a0).abs()))
        .collect();
    let span = pts.last().unwrap().x - t0;
    let tau0 = match weighted_linear(&resid) {
        Ok((_, slope, _, _, _)) if slope < -1e-12 => -1.0 / slope,
        _ => (span / 3.0).max(1e-6),
    };

    let (params, errors, chi2) = levenberg_marquardt(&ExpApproach, &pts, &[a0, b0, tau0])?;
    if !errors[1].is_finite() || params[1].abs() <= 2.0 * errors[1] {
        flags.push("amplitude consistent with zero; tau unidentifiable".to_string());
    }
    Ok(FitResult::finish(
        "exp_approach",
        &["A", "B", "tau"],
        &params,
        &errors,
        chi2,
        pts.len(),
        window.actual(&pts),
        flags,
    ))
}

/// Default window for equilibration-time fits: fit the full range once,
/// then drop leading times until the first point whose residual is within
/// 5 sigma of the pure-exponential trend. Early transients that have not
/// yet settled onto a single decay mode are excluded this way.
pub fn auto_window_exponential(data: &[DataPoint]) -> Result<Window> {
    let full = fit_exponential(data, Window::all())?;
    let (a, b, tau) = (full.value("A"), full.value("B"), full.value("tau"));
    let start = data
        .iter()
        .position(|p| {
            let residual = p.y - (a + b * (-p.x / tau).exp());
            residual.abs() <= 5.0 * p.err.max(1e-300)
        })
        .unwrap_or(0);
    // Keep enough points for the three-parameter fit.
    let start = start.min(data.len().saturating_sub(6));
    Ok(Window::new(data[start].x, f64::INFINITY))
}

/// Fit `1/(gamma tau) = C |p|^r` as a weighted line in log-log space.
/// Points with non-positive rate are excluded and reported in the flags.
pub fn fit_powerlaw(data: &[DataPoint]) -> Result<FitResult> {
    if data.iter().any(|p| p.x <= 0.0) {
        return Err(Error::config("power-law fit needs |p| > 0 for every point"));
    }
    let mut flags = Vec::new();
    let usable: Vec<DataPoint> = data.iter().copied().filter(|p| p.y > 0.0).collect();
    let excluded = data.len() - usable.len();
    if excluded > 0 {
        flags.push(format!("{excluded} non-positive rate value(s) excluded"));
    }
    if usable.len() < 2 {
        return Err(Error::config(
            "power-law fit needs at least 2 positive points",
        ));
    }
    if usable.len() == 2 {
        flags.push("zero degrees of freedom: exact line through 2 points".to_string());
    }
    let logged: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|p| (p.x.ln(), p.y.ln(), p.err / p.y))
        .collect();
    let (a, b, var_a, var_b, chi2) = weighted_linear(&logged)?;
    let c = a.exp();
    let values = [c, b];
    let errors = [c * var_a.sqrt(), var_b.sqrt()];
    let window = Window::all().actual(&usable);
    Ok(FitResult::finish(
        "powerlaw",
        &["C", "r"],
        &values,
        &errors,
        chi2,
        usable.len(),
        window,
        flags,
    ))
}

struct FiniteSize;

impl FiniteSize {
    fn series(u: f64) -> f64 {
        let c = FINITE_SIZE_COEFFS;
        c[0] + c[1] * u + c[2] * u * u + c[3] * u * u * u
    }
    fn series_deriv(u: f64) -> f64 {
        let c = FINITE_SIZE_COEFFS;
        c[1] + 2.0 * c[2] * u + 3.0 * c[3] * u * u
    }
}

impl Model for FiniteSize {
    // x is L; p = [m, xi]; y = m^2 L^4 / 3 * series(xi / L).
    fn eval(&self, l: f64, p: &[f64]) -> f64 {
        let u = p[1] / l;
        p[0] * p[0] * l.powi(4) / 3.0 * Self::series(u)
    }
    fn grad(&self, l: f64, p: &[f64], out: &mut [f64]) {
        let u = p[1] / l;
        let l4_3 = l.powi(4) / 3.0;
        out[0] = 2.0 * p[0] * l4_3 * Self::series(u);
        out[1] = p[0] * p[0] * l4_3 * Self::series_deriv(u) / l;
    }
    fn admissible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[1] >= 0.0 && p.iter().all(|v| v.is_finite())
    }
}

/// Forward evaluation of the finite-size form, for synthetic data and
/// validity checks.
pub fn finite_size_prediction(m: f64, xi: f64, l: f64) -> f64 {
    FiniteSize.eval(l, &[m, xi])
}

/// Fit the staggered order parameter and correlation length (m, xi) from
/// `<Ms^2>(L)` at fixed time, with the series constants held fixed.
/// Data x-coordinates are the lattice sides L.
pub fn fit_finite_size(data: &[DataPoint]) -> Result<FitResult> {
    let mut sides: Vec<f64> = data.iter().map(|p| p.x).collect();
    sides.sort_by(f64::total_cmp);
    sides.dedup();
    if sides.len() < 2 {
        return Err(Error::config(
            "finite-size fit needs at least 2 distinct volumes",
        ));
    }
    if data.iter().any(|p| p.y <= 0.0) {
        return Err(Error::config(
            "finite-size fit needs positive <Ms^2> values",
        ));
    }
    // Deterministic initialization: scan xi, solving for the optimal m^2 in
    // closed form at each scan point (the model is linear in m^2). The best
    // scan point seeds the refinement; this avoids the local minima of the
    // cubic series.
    let l_smallest = sides[0];
    let mut best: Option<(f64, f64, f64)> = None; // (chi2, m, xi)
    for k in 0..=90 {
        let xi = 0.005 * k as f64 * l_smallest;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut valid = true;
        for p in data {
            let f = p.x.powi(4) / 3.0 * FiniteSize::series(xi / p.x);
            if f <= 0.0 {
                valid = false;
                break;
            }
            let w = p.weight();
            num += w * f * p.y;
            den += w * f * f;
        }
        if !valid || den <= 0.0 || num <= 0.0 {
            continue;
        }
        let m2 = num / den;
        let m = m2.sqrt();
        let chi2: f64 = data
            .iter()
            .map(|p| {
                let r = p.y - FiniteSize.eval(p.x, &[m, xi]);
                p.weight() * r * r
            })
            .sum();
        if best.map_or(true, |(c, _, _)| chi2 < c) {
            best = Some((chi2, m, xi));
        }
    }
    let (_, m0, xi0) =
        best.ok_or_else(|| Error::numerical("finite-size fit found no admissible initialization"))?;
    let (params, errors, chi2) = levenberg_marquardt(&FiniteSize, data, &[m0, xi0])?;
    let mut flags = Vec::new();
    let l_min = sides[0];
    let u = params[1] / l_min;
    if FINITE_SIZE_COEFFS[3].abs() * u * u * u >= FINITE_SIZE_COEFFS[0] {
        flags.push(format!(
            "extrapolation warning: cubic term dominates at L={l_min} (xi/L = {u:.3})"
        ));
    }
    Ok(FitResult::finish(
        "finite_size",
        &["m_s", "xi"],
        &params,
        &errors,
        chi2,
        data.len(),
        Window::all().actual(data),
        flags,
    ))
}

/// Log-linear fit of an exponential decay `y = M0 exp(-t / tau)` through the
/// positive points of the window.
pub fn fit_order_parameter_decay(data: &[DataPoint], window: Window) -> Result<FitResult> {
    let pts = window.clip(data);
    if pts.iter().any(|p| p.y <= 0.0) {
        return Err(Error::config(
            "order-parameter decay fit needs positive values in the window",
        ));
    }
    if pts.len() < 3 {
        return Err(Error::config(
            "order-parameter decay fit needs at least 3 points",
        ));
    }
    let logged: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.x, p.y.ln(), p.err / p.y)).collect();
    let (a, b, var_a, var_b, chi2) = weighted_linear(&logged)?;
    let m0 = a.exp();
    let mut flags = Vec::new();
    let (tau, tau_err) = if b < -1e-300 {
        (-1.0 / b, var_b.sqrt() / (b * b))
    } else {
        flags.push("series does not decay: tau -> infinity".to_string());
        (f64::INFINITY, f64::INFINITY)
    };
    let values = [m0, tau];
    let errors = [m0 * var_a.sqrt(), tau_err];
    Ok(FitResult::finish(
        "order_decay",
        &["M0", "tau"],
        &values,
        &errors,
        chi2,
        pts.len(),
        window.actual(&pts),
        flags,
    ))
}

/// Stationary value of `<|S~(p)|^2>` (sigma units, p != 0) for a mixture of
/// total-magnetization sectors: uniform within each sector gives
/// `(N^2 - m^2)/(N - 1)` per sector, independent of p.
pub fn steady_state_prediction(
    n_sites: usize,
    momentum: &Momentum,
    sector_mix: &[(i64, f64)],
) -> Result<f64> {
    if momentum.is_zero() {
        return Err(Error::config(
            "mode (0,0) is conserved and does not relax; no steady-state prediction",
        ));
    }
    if sector_mix.is_empty() {
        return Err(Error::config("sector mix must not be empty"));
    }
    let total_weight: f64 = sector_mix.iter().map(|&(_, w)| w).sum();
    if total_weight <= 0.0 {
        return Err(Error::config("sector weights must sum to a positive value"));
    }
    let n = n_sites as f64;
    let mut value = 0.0;
    for &(m, w) in sector_mix {
        if m.abs() as usize > n_sites || (m + n_sites as i64) % 2 != 0 {
            return Err(Error::config(format!(
                "sector {m} infeasible on {n_sites} sites"
            )));
        }
        let m = m as f64;
        value += w / total_weight * (n * n - m * m) / (n - 1.0);
    }
    Ok(value)
}
