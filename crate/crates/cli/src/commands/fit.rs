//! `spindissim fit`: run one of the fit models over a series CSV.
//!
//! Input columns are `time,mean,err,n`; the time column carries |p| for the
//! power law and the lattice side L for the finite-size model.

use std::path::Path;

use spindissim_core::analysis::fit::{
    auto_window_exponential, fit_exponential, fit_finite_size, fit_order_parameter_decay,
    fit_powerlaw, DataPoint, FitResult, Window,
};
use spindissim_core::analysis::observables::Convention;
use spindissim_core::analysis::series::{fmt_g17, TimeSeries, TimeUnit};
use spindissim_core::error::{Error, Result};

use crate::commands::{ensure_dir, write_json};

pub const MODELS: [&str; 4] = ["exp_approach", "powerlaw", "finite_size", "order_decay"];

pub fn run(
    model: &str,
    input: &Path,
    window: Option<(f64, f64)>,
    convention: Option<Convention>,
    out_dir: &Path,
    residuals: bool,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let series = TimeSeries::read_csv(
        input,
        "input",
        convention.unwrap_or(Convention::Sigma),
        TimeUnit::GammaT,
    )?;
    let data: Vec<DataPoint> = series
        .points
        .iter()
        .map(|p| DataPoint::new(p.time, p.mean, p.err))
        .collect();
    let explicit = window.map(|(lo, hi)| Window::new(lo, hi));

    let fit = match model {
        // Without an explicit window, equilibration fits drop early points
        // outside the 5-sigma exponential residual trend.
        "exp_approach" => {
            let window = match explicit {
                Some(w) => w,
                None => auto_window_exponential(&data)?,
            };
            fit_exponential(&data, window)?
        }
        "powerlaw" => fit_powerlaw(&data)?,
        "finite_size" => fit_finite_size(&data)?,
        "order_decay" => fit_order_parameter_decay(&data, explicit.unwrap_or_else(Window::all))?,
        other => {
            return Err(Error::config(format!(
                "unknown model '{other}' (expected one of {MODELS:?})"
            )))
        }
    };
    let mut fit = fit;
    fit.convention = convention;

    write_json(&out_dir.join(format!("fit_{model}.json")), &fit)?;
    if residuals {
        write_residuals(&fit, &data, model, out_dir)?;
    }
    let params: Vec<String> = fit
        .params
        .iter()
        .map(|p| format!("{} = {} +- {}", p.name, p.value, p.error))
        .collect();
    println!(
        "fit {model}: {} | chi2/dof = {:.4} ({} points)",
        params.join(", "),
        fit.chi2_dof,
        fit.n_points
    );
    for flag in &fit.flags {
        println!("  flag: {flag}");
    }
    Ok(())
}

fn write_residuals(fit: &FitResult, data: &[DataPoint], model: &str, out_dir: &Path) -> Result<()> {
    let predict = |x: f64| -> Option<f64> {
        match model {
            "exp_approach" => Some(fit.value("A") + fit.value("B") * (-x / fit.value("tau")).exp()),
            "powerlaw" => Some(fit.value("C") * x.powf(fit.value("r"))),
            "finite_size" => Some(spindissim_core::analysis::fit::finite_size_prediction(
                fit.value("m_s"),
                fit.value("xi"),
                x,
            )),
            "order_decay" => Some(fit.value("M0") * (-x / fit.value("tau")).exp()),
            _ => None,
        }
    };
    let mut text = String::from("x,y,err,model,residual\n");
    for p in data {
        if let Some(m) = predict(p.x) {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_g17(p.x),
                fmt_g17(p.y),
                fmt_g17(p.err),
                fmt_g17(m),
                fmt_g17(p.y - m)
            ));
        }
    }
    std::fs::write(out_dir.join(format!("fit_{model}_residuals.csv")), text)
        .map_err(|e| Error::config(format!("cannot write residuals: {e}")))
}
