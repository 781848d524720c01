//! Run manifest: identifies a run by its config hash and records progress,
//! so interrupted runs can be resumed and mismatched resumes refused.

use std::path::Path;

use serde::{Deserialize, Serialize};

use spindissim_core::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub n_replicas: usize,
    /// "chacha8(master_seed, replica, \"engine\")" and friends.
    pub rng_scheme: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// Sorted ids of replicas whose records were persisted.
    pub completed_replicas: Vec<u64>,
}

impl Manifest {
    pub fn new(config_hash: String, master_seed: u64, n_replicas: usize) -> Self {
        Manifest {
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            n_replicas,
            rng_scheme: "chacha8(master_seed, stream_id, context)".to_string(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            completed_replicas: Vec::new(),
        }
    }

    pub fn path(out_dir: &Path) -> std::path::PathBuf {
        out_dir.join("manifest.json")
    }

    pub fn load(out_dir: &Path) -> Result<Manifest> {
        let path = Self::path(out_dir);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("malformed manifest {}: {e}", path.display())))
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let mut sorted = self.clone();
        sorted.completed_replicas.sort_unstable();
        let text = serde_json::to_string_pretty(&sorted).expect("manifest serializes");
        std::fs::write(Self::path(out_dir), text)
            .map_err(|e| Error::config(format!("cannot write manifest: {e}")))
    }
}
