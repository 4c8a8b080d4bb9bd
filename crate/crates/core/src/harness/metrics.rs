//! Per-round records, run summaries and their CSV files.
//!
//! Column order of every file is the field order of its record type and is
//! fixed; files with no rows still carry the header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Scheme;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundStatus {
    Ok,
    /// The update of this round produced non-finite weights; the run stopped here.
    Diverged,
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 1-based round index.
    pub round: usize,
    /// Test accuracy after the update.
    pub test_accuracy: f64,
    /// Sample-weighted training loss after the update.
    pub train_loss: f64,
    /// Gap bound of the decision in force and its three parts; controlled scheme only.
    pub gamma: Option<f64>,
    pub gamma_quantization: Option<f64>,
    pub gamma_pruning: Option<f64>,
    pub gamma_transmission: Option<f64>,
    /// Seconds: slowest device plus the server time.
    pub round_delay: f64,
    /// Joules summed over devices.
    pub round_energy: f64,
    pub max_device_energy: f64,
    pub cumulative_delay: f64,
    pub cumulative_energy: f64,
    pub devices_received: usize,
    /// Whether the round met both budgets.
    pub feasible: bool,
    /// Devices running the fallback decision because no decision met the budgets.
    pub degraded: usize,
    pub status: RoundStatus,
}

pub const METRICS_COLUMNS: [&str; 16] = [
    "round",
    "test_accuracy",
    "train_loss",
    "gamma",
    "gamma_quantization",
    "gamma_pruning",
    "gamma_transmission",
    "round_delay",
    "round_energy",
    "max_device_energy",
    "cumulative_delay",
    "cumulative_energy",
    "devices_received",
    "feasible",
    "degraded",
    "status",
];

/// One row of `device_energy.csv`: a device in a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRound {
    pub round: usize,
    pub device: usize,
    pub pruning: f64,
    /// Quantization bits; controlled scheme only.
    pub bits: Option<u8>,
    pub power: f64,
    pub received: bool,
    /// Training plus upload seconds.
    pub delay: f64,
    pub energy: f64,
}

pub const DEVICE_COLUMNS: [&str; 8] = ["round", "device", "pruning", "bits", "power", "received", "delay", "energy"];

/// One row of `controller_trace.csv`: a device's decision after an outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub iteration: usize,
    pub device: usize,
    pub pruning: f64,
    pub bits: u8,
    pub power: f64,
    pub gamma: f64,
    pub best_gamma: f64,
}

pub const TRACE_COLUMNS: [&str; 8] = [
    "round",
    "iteration",
    "device",
    "pruning",
    "bits",
    "power",
    "gamma",
    "best_gamma",
];

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub rounds: usize,
    pub final_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub target_accuracy: f64,
    /// First round whose test accuracy reaches the target.
    pub rounds_to_target: Option<usize>,
    /// Cumulative delay and energy up to and including that round.
    pub delay_to_target: Option<f64>,
    pub energy_to_target: Option<f64>,
    pub total_delay: f64,
    pub total_energy: f64,
    pub infeasible_rounds: usize,
    /// Largest number of degraded devices in any round.
    pub max_degraded: usize,
    /// `ok`, or `diverged at round n: reason`.
    pub status: String,
}

pub const SUMMARY_COLUMNS: [&str; 15] = [
    "scenario",
    "scheme",
    "seed",
    "rounds",
    "final_accuracy",
    "final_loss",
    "target_accuracy",
    "rounds_to_target",
    "delay_to_target",
    "energy_to_target",
    "total_delay",
    "total_energy",
    "infeasible_rounds",
    "max_degraded",
    "status",
];

impl Summary {
    pub fn from_rounds(
        scenario: &str,
        scheme: Scheme,
        seed: u64,
        target_accuracy: f64,
        rounds: &[RoundMetrics],
        failure: Option<&str>,
    ) -> Self {
        let ok: Vec<&RoundMetrics> = rounds.iter().filter(|r| r.status == RoundStatus::Ok).collect();
        let hit = ok.iter().find(|r| r.test_accuracy >= target_accuracy);
        let last = rounds.last();
        Self {
            scenario: scenario.to_string(),
            scheme,
            seed,
            rounds: rounds.len(),
            final_accuracy: ok.last().map(|r| r.test_accuracy),
            final_loss: ok.last().map(|r| r.train_loss),
            target_accuracy,
            rounds_to_target: hit.map(|r| r.round),
            delay_to_target: hit.map(|r| r.cumulative_delay),
            energy_to_target: hit.map(|r| r.cumulative_energy),
            total_delay: last.map_or(0.0, |r| r.cumulative_delay),
            total_energy: last.map_or(0.0, |r| r.cumulative_energy),
            infeasible_rounds: rounds.iter().filter(|r| !r.feasible).count(),
            max_degraded: rounds.iter().map(|r| r.degraded).max().unwrap_or(0),
            status: failure.map_or_else(|| "ok".to_string(), str::to_string),
        }
    }
}

/// Writes `rows` under `header` to any writer.
pub fn write_rows<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `rows` under `header` to `path`.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(BufWriter::new(file), header, rows)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
