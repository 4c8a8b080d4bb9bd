//! Experiment orchestration: scenario files, data partitioning, the round
//! loop for every scheme, sweeps and CSV output.

pub mod config;
pub mod metrics;
pub mod partition;
pub mod run;
pub mod sweep;
pub mod validate;

use std::path::Path;

pub use config::{ScenarioConfig, Scheme};
pub use metrics::{DeviceRound, RoundMetrics, RoundStatus, Summary, TraceRecord};
pub use partition::partition_data;
pub use run::{run_scheme, RoundView, RunRecord, Setup};
pub use sweep::{sweep, SweepConfig, SweepOutcome};
pub use validate::{self_checks, Check};

use crate::error::{Error, Result};
use metrics::{write_csv, DEVICE_COLUMNS, METRICS_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS};

/// Writes `metrics.csv`, `device_energy.csv` and `summary.csv` into `dir`,
/// plus `controller_trace.csv` when `verbose` is set.
pub fn write_run(dir: &Path, record: &RunRecord, verbose: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("metrics.csv"), &METRICS_COLUMNS, &record.rounds)?;
    write_csv(&dir.join("device_energy.csv"), &DEVICE_COLUMNS, &record.devices)?;
    write_csv(&dir.join("summary.csv"), &SUMMARY_COLUMNS, &[record.summary()])?;
    if verbose {
        write_csv(&dir.join("controller_trace.csv"), &TRACE_COLUMNS, &record.trace)?;
    }
    Ok(())
}

pub fn write_summaries(path: &Path, rows: &[Summary]) -> Result<()> {
    write_csv(path, &SUMMARY_COLUMNS, rows)
}
