//! Run configuration, binary snapshots and CSV diagnostics.

mod config;
mod rundir;
mod snapshot;
mod tables;

pub use config::{
    CalibrationSection, GridSection, RunConfig, SobolevSection, SolverSection, VerifySection, DEFAULT_CONFIG,
};
pub use rundir::{list_snapshots, snapshot_dir, snapshot_path, RunSummary};
pub use snapshot::{header_len, write_atomic, Snapshot, MAGIC, VERSION};
pub use tables::{fluxes_csv, shells_csv, RunTables, FLUXES_HEADER, SHELLS_HEADER};
