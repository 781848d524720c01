pub mod evolve;
pub mod fit;
pub mod oracle;
pub mod steady;
pub mod thermal;

use std::path::Path;

use spindissim_core::analysis::series::fmt_g17;
use spindissim_core::error::{Error, Result};

/// File-system-safe form of an observable name:
/// `ms2[spin_half]` -> `ms2_spin_half`, `sf[1,0]` -> `sf_1_0`.
pub fn sanitize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invariant(format!("JSON serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

/// Rows of the trajectory stream schema `replica,time,observable,value`.
pub fn trajectory_rows(
    replica: u64,
    names: &[String],
    traj: &spindissim_core::engine::Trajectory,
) -> String {
    let mut out = String::new();
    for (t_idx, &time) in traj.times.iter().enumerate() {
        for (o_idx, name) in names.iter().enumerate() {
            out.push_str(&format!(
                "{replica},{},{name},{}\n",
                fmt_g17(time),
                fmt_g17(traj.values[o_idx][t_idx])
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize_name("ms2[spin_half]"), "ms2_spin_half");
        assert_eq!(sanitize_name("sf[1,0]"), "sf_1_0");
        assert_eq!(sanitize_name("stot"), "stot");
    }
}
