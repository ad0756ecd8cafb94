//! Layout of a simulation output directory.
//!
//! ```text
//! DIR/config.toml          the configuration that produced the run
//! DIR/run.toml             RunSummary
//! DIR/snapshots/NNNNNNNN.bin
//! DIR/shells.csv, DIR/fluxes.csv
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::snapshot::write_atomic;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub t_end: f64,
    /// Time at which the blow-up guard stopped the run, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted_at: Option<f64>,
    pub psi0: f64,
    pub max_projection_correction: f64,
    pub snapshots: usize,
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn snapshot_dir(run: &Path) -> PathBuf {
    run.join("snapshots")
}

pub fn snapshot_path(run: &Path, step: usize) -> PathBuf {
    snapshot_dir(run).join(format!("{step:08}.bin"))
}

/// Snapshot files of a run, in step order.
pub fn list_snapshots(run: &Path) -> Result<Vec<PathBuf>> {
    let mut steps: Vec<(usize, PathBuf)> = std::fs::read_dir(snapshot_dir(run))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let step = p.file_stem()?.to_str()?.parse().ok()?;
            (p.extension()? == "bin").then_some((step, p))
        })
        .collect();
    steps.sort();
    Ok(steps.into_iter().map(|(_, p)| p).collect())
}
