//! Sweeps: one base scenario, named overrides, several schemes and seeds.
//!
//! A sweep file has a `[base]` table holding a scenario, a `schemes` list,
//! and one `[[scenario]]` table per variant. Each variant is the base with
//! the variant's keys merged in, tables merged key by key:
//!
//! ```toml
//! schemes = ["ltfl", "fedsgd"]
//!
//! [base]
//! devices = 10
//!
//! [[scenario]]
//! name = "far"
//! channel = { distance_m = [250.0, 300.0] }
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::config::{ScenarioConfig, Scheme};
use super::metrics::{write_csv, Summary, SUMMARY_COLUMNS};
use super::run::Setup;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub schemes: Vec<Scheme>,
    pub scenarios: Vec<ScenarioConfig>,
}

/// Merges `over` into `base`, descending into tables present in both.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut doc: Table = text.parse().map_err(config_error)?;
        let base = match doc.remove("base") {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(Error::Config("`base` must be a table".into())),
            None => Table::new(),
        };
        let schemes: Vec<Scheme> = match doc.remove("schemes") {
            Some(v) => v.try_into().map_err(config_error)?,
            None => vec![Scheme::Ltfl],
        };
        let variants = match doc.remove("scenario") {
            Some(Value::Array(items)) => items,
            Some(_) => return Err(Error::Config("`scenario` must be an array of tables".into())),
            None => vec![Value::Table(Table::new())],
        };
        if let Some(key) = doc.keys().next() {
            return Err(Error::Config(format!("unknown sweep key `{key}`")));
        }
        let scenarios = variants
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let Value::Table(over) = v else {
                    return Err(Error::Config("each `[[scenario]]` must be a table".into()));
                };
                let mut merged = base.clone();
                merge(&mut merged, over);
                merged
                    .entry("name")
                    .or_insert_with(|| Value::String(format!("scenario-{}", i + 1)));
                let config: ScenarioConfig = merged.try_into().map_err(config_error)?;
                config.validate()?;
                Ok(config)
            })
            .collect::<Result<Vec<_>>>()?;
        let sweep = Self { schemes, scenarios };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// A sweep of one scenario.
    pub fn single(config: ScenarioConfig, schemes: Vec<Scheme>) -> Result<Self> {
        let sweep = Self {
            schemes,
            scenarios: vec![config],
        };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.scenarios.is_empty() {
            return Err(Error::Config("a sweep needs at least one scheme and one scenario".into()));
        }
        let first = &self.scenarios[0];
        for s in &self.scenarios[1..] {
            if s.dataset != first.dataset || s.seeds != first.seeds {
                return Err(Error::Config(format!(
                    "scenario `{}` changes the dataset or the seeds; all scenarios of a sweep must share them",
                    s.name
                )));
            }
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("scenario name `{}` appears twice", s.name)));
            }
        }
        Ok(())
    }
}

/// One row of the long-format curves file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub scenario: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub round: usize,
    pub test_accuracy: f64,
    pub train_loss: f64,
    pub gamma: Option<f64>,
    pub cumulative_delay: f64,
    pub cumulative_energy: f64,
    pub devices_received: usize,
}

pub const CURVE_COLUMNS: [&str; 10] = [
    "scenario",
    "scheme",
    "seed",
    "round",
    "test_accuracy",
    "train_loss",
    "gamma",
    "cumulative_delay",
    "cumulative_energy",
    "devices_received",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One row per scenario, scheme and seed, in that nesting order.
    pub summaries: Vec<Summary>,
    pub curves: Vec<CurvePoint>,
}

impl SweepOutcome {
    pub fn find(&self, scenario: &str, scheme: Scheme, seed: u64) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.scenario == scenario && s.scheme == scheme && s.seed == seed)
    }

    /// Writes `summary.csv` and `curves.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_csv(&dir.join("summary.csv"), &SUMMARY_COLUMNS, &self.summaries)?;
        write_csv(&dir.join("curves.csv"), &CURVE_COLUMNS, &self.curves)
    }
}

/// Runs every scheme on every scenario and seed. Scenario/seed pairs run in
/// parallel; the output order does not depend on the thread count.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let jobs: Vec<(&ScenarioConfig, u64)> = config
        .scenarios
        .iter()
        .flat_map(|s| s.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(scenario, seed)| {
            let setup = Setup::new(scenario, seed)?;
            config.schemes.iter().map(|&scheme| setup.run(scheme)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = SweepOutcome {
        summaries: Vec::new(),
        curves: Vec::new(),
    };
    // Reorder from (scenario, seed, scheme) to (scenario, scheme, seed).
    let per_scenario = config.schemes.len();
    let mut index = 0;
    for scenario in &config.scenarios {
        let block = &results[index..index + scenario.seeds.len()];
        index += scenario.seeds.len();
        for k in 0..per_scenario {
            for runs in block {
                let run = &runs[k];
                outcome.summaries.push(run.summary());
                outcome.curves.extend(run.rounds.iter().map(|r| CurvePoint {
                    scenario: run.scenario.clone(),
                    scheme: run.scheme,
                    seed: run.seed,
                    round: r.round,
                    test_accuracy: r.test_accuracy,
                    train_loss: r.train_loss,
                    gamma: r.gamma,
                    cumulative_delay: r.cumulative_delay,
                    cumulative_energy: r.cumulative_energy,
                    devices_received: r.devices_received,
                }));
            }
        }
    }
    Ok(outcome)
}
