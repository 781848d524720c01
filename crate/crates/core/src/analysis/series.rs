//! Time series containers and their CSV form.
//!
//! The on-disk schema is fixed: header `time,mean,err,n`, UTF-8, LF line
//! endings, floats rendered as C's `%.17g` so identical data is
//! byte-identical across runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::observables::Convention;
use crate::error::{Error, Result};

/// Unit of the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Discrete measurement rounds (one round = 4 sweep steps = N = 4M
    /// individual measurements after M rounds).
    Rounds,
    /// Dimensionless gamma * t of the continuous process.
    GammaT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub mean: f64,
    pub err: f64,
    pub n: u64,
}

/// One observable's mean and standard error versus time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    pub observable: String,
    pub convention: Convention,
    pub time_unit: TimeUnit,
    pub points: Vec<SeriesPoint>,
}

impl TimeSeries {
    pub fn new(observable: impl Into<String>, convention: Convention, time_unit: TimeUnit) -> Self {
        TimeSeries {
            observable: observable.into(),
            convention,
            time_unit,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, mean: f64, err: f64, n: u64) {
        self.points.push(SeriesPoint { time, mean, err, n });
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::config("series times must be strictly increasing"));
        }
        if self.points.iter().any(|p| p.err < 0.0) {
            return Err(Error::config("series errors must be non-negative"));
        }
        Ok(())
    }

    /// Render to the canonical CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,mean,err,n\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_g17(p.time),
                fmt_g17(p.mean),
                fmt_g17(p.err),
                p.n
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
    }

    /// Parse the canonical CSV format; errors carry 1-based line numbers.
    pub fn parse_csv(
        text: &str,
        observable: impl Into<String>,
        convention: Convention,
        time_unit: TimeUnit,
    ) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "time,mean,err,n" => {}
            Some((_, header)) => {
                return Err(Error::config(format!(
                    "line 1: expected header 'time,mean,err,n', got '{header}'"
                )))
            }
            None => return Err(Error::config("line 1: empty input")),
        }
        let mut series = TimeSeries::new(observable, convention, time_unit);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::config(format!(
                    "line {lineno}: expected 4 fields, got {}",
                    fields.len()
                )));
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("line {lineno}: bad {what} '{s}': {e}")))
            };
            let time = parse_f(fields[0], "time")?;
            let mean = parse_f(fields[1], "mean")?;
            let err = parse_f(fields[2], "err")?;
            let n = fields[3].trim().parse::<u64>().map_err(|e| {
                Error::config(format!("line {lineno}: bad count '{}': {e}", fields[3]))
            })?;
            series.push(time, mean, err, n);
        }
        if series.points.is_empty() {
            return Err(Error::config("line 1: no data rows"));
        }
        Ok(series)
    }

    pub fn read_csv(
        path: &Path,
        observable: impl Into<String>,
        convention: Convention,
        time_unit: TimeUnit,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_csv(&text, observable, convention, time_unit)
    }
}

/// C's `%.17g`: up to 17 significant digits, fixed or scientific notation
/// by exponent, trailing zeros stripped, exponent printed with a sign and
/// at least two digits.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // Round to 17 significant digits in scientific form to classify.
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= 17 {
        let mantissa = strip_trailing_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let prec = (16 - exp).max(0) as usize;
        let fixed = format!("{:.*}", prec, x);
        if fixed.contains('.') {
            strip_trailing_zeros(&fixed).to_string()
        } else {
            fixed
        }
    }
}

fn strip_trailing_zeros(s: &str) -> &str {
    if !s.contains('.') {
        return s;
    }
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s)
}
