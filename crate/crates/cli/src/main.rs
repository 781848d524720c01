//! Command-line front end: run configuration, seeding, replica farming,
//! checkpointing, and plot-ready data files.
//!
//! Exit codes: 0 success, 2 user/config error, 3 numerical failure,
//! 4 internal invariant violation.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spindissim_core::error::Error;

use config::Config;

#[derive(Parser)]
#[command(
    name = "spindissim",
    version,
    about = "Measurement-driven spin dynamics simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker pool size (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample thermal configurations and report staggered moments.
    Thermal(CommonArgs),
    /// Evolve a replica ensemble through the measurement process.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
        /// Resume from an existing checkpointed run.
        #[arg(long)]
        resume: bool,
    },
    /// Exact small-lattice evolution and the classical-reduction check.
    Oracle(CommonArgs),
    /// Sample the per-sector stationary distribution directly.
    Steady(CommonArgs),
    /// Fit a model to a series CSV.
    Fit {
        /// One of: exp_approach, powerlaw, finite_size, order_decay.
        #[arg(long)]
        model: String,
        /// Input CSV (header `time,mean,err,n`).
        #[arg(long)]
        input: PathBuf,
        /// Restrict the fit to times in [LO, HI].
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Record the series' spin convention in the fit report.
        #[arg(long, value_parser = parse_convention)]
        convention: Option<spindissim_core::analysis::observables::Convention>,
        /// Also write a residual CSV.
        #[arg(long)]
        residuals: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker pool size (accepted for interface uniformity).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn parse_convention(
    s: &str,
) -> Result<spindissim_core::analysis::observables::Convention, String> {
    use spindissim_core::analysis::observables::Convention;
    match s {
        "sigma" => Ok(Convention::Sigma),
        "spin_half" => Ok(Convention::SpinHalf),
        other => Err(format!("unknown convention '{other}' (sigma | spin_half)")),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| "window must be LO:HI".to_string())?;
    let lo: f64 = lo
        .parse()
        .map_err(|e| format!("bad window low '{lo}': {e}"))?;
    let hi: f64 = hi
        .parse()
        .map_err(|e| format!("bad window high '{hi}': {e}"))?;
    if hi < lo {
        return Err("window high must be >= low".to_string());
    }
    Ok((lo, hi))
}

fn load_config(common: &CommonArgs) -> Result<(Config, PathBuf), Error> {
    let mut config = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.run.out_dir));
    if let Some(workers) = common.workers {
        spindissim_core::engine::configure_worker_pool(workers);
    }
    Ok((config, out_dir))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Thermal(common) => {
            let (config, out_dir) = load_config(&common)?;
            commands::thermal::run(&config, &out_dir)
        }
        Command::Evolve { common, resume } => {
            let (config, out_dir) = load_config(&common)?;
            commands::evolve::run(&config, &out_dir, resume)
        }
        Command::Oracle(common) => {
            let (config, out_dir) = load_config(&common)?;
            commands::oracle::run(&config, &out_dir)
        }
        Command::Steady(common) => {
            let (config, out_dir) = load_config(&common)?;
            commands::steady::run(&config, &out_dir)
        }
        Command::Fit {
            model,
            input,
            window,
            convention,
            residuals,
            out,
            workers,
        } => {
            if let Some(workers) = workers {
                spindissim_core::engine::configure_worker_pool(workers);
            }
            commands::fit::run(&model, &input, window, convention, &out, residuals)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Size(_) => 2,
                Error::Numerical(_) => 3,
                Error::Invariant(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
