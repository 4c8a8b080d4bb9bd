//! Full simulation runs on the scenario files under `configs/`.

use std::path::PathBuf;

use ltfl_core::harness::metrics::read_csv;
use ltfl_core::harness::{self, RoundMetrics, RoundStatus, ScenarioConfig, Scheme, SweepConfig, SweepOutcome};

use crate::Verdict;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

macro_rules! try_or_fail {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return Verdict::new(false, format!("error: {e}")),
        }
    };
}

/// A 200-round run of the reference scenario, checked row by row from the
/// CSV it writes, with no tolerance.
pub fn budget_compliance() -> Verdict {
    let config = try_or_fail!(ScenarioConfig::load(&config_path("reference.toml")));
    let seed = config.seeds.first().copied().unwrap_or(1);
    let record = try_or_fail!(harness::run_scheme(&config, Scheme::Ltfl, seed));
    let dir = try_or_fail!(tempfile::tempdir());
    try_or_fail!(harness::write_run(dir.path(), &record, false));
    let rows: Vec<RoundMetrics> = try_or_fail!(read_csv(&dir.path().join("metrics.csv")));

    let b = &config.budgets;
    let delay_over = rows.iter().filter(|r| !(r.round_delay <= b.max_delay)).count();
    let energy_over = rows.iter().filter(|r| !(r.max_device_energy <= b.max_energy)).count();
    let worst_delay = rows.iter().map(|r| r.round_delay).fold(0.0, f64::max);
    let worst_energy = rows.iter().map(|r| r.max_device_energy).fold(0.0, f64::max);
    let complete = rows.len() == config.rounds && rows.iter().all(|r| r.status == RoundStatus::Ok);
    Verdict::new(
        complete && delay_over == 0 && energy_over == 0,
        format!(
            "{} rounds; {delay_over} over the delay budget, {energy_over} over the energy budget; \
             worst {worst_delay:.3}/{} s, {worst_energy:.4}/{} J; {} degraded at most",
            rows.len(),
            b.max_delay,
            b.max_energy,
            rows.iter().map(|r| r.degraded).max().unwrap_or(0)
        ),
    )
}

fn run_sweep(name: &str) -> Result<(SweepConfig, SweepOutcome), String> {
    let config = SweepConfig::load(&config_path(name)).map_err(|e| e.to_string())?;
    let outcome = harness::sweep(&config).map_err(|e| e.to_string())?;
    Ok((config, outcome))
}

/// Seeds for which `holds` is true, out of the sweep's seeds.
fn tally(config: &SweepConfig, holds: impl Fn(u64) -> bool) -> (usize, usize) {
    let seeds = &config.scenarios[0].seeds;
    (seeds.iter().filter(|&&s| holds(s)).count(), seeds.len())
}

/// All present and ordered by `ok` between neighbours.
fn ordered(values: &[Option<f64>], ok: fn(f64, f64) -> bool) -> bool {
    values.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if ok(a, b)))
}

fn fmt_series(values: &[Option<f64>], digits: usize) -> String {
    let parts: Vec<String> = values
        .iter()
        .map(|v| v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}")))
        .collect();
    parts.join("/")
}

/// Per-seed series of `field` across the sweep's scenarios, in file order.
fn series(config: &SweepConfig, out: &SweepOutcome, seed: u64, field: impl Fn(&ltfl_core::Summary) -> Option<f64>) -> Vec<Option<f64>> {
    config
        .scenarios
        .iter()
        .map(|s| out.find(&s.name, Scheme::Ltfl, seed).and_then(&field))
        .collect()
}

/// Three qualitative orderings, each required on a majority of seeds:
/// the controlled scheme reaches the target accuracy with less delay and
/// energy than full-precision uploads at half power; final accuracy does not
/// fall as the fading coefficient grows; delay to target does not grow with
/// the device count.
pub fn orderings() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;

    // (a) controlled scheme against full-precision uploads.
    let (cfg, out) = try_or_fail!(run_sweep("compare.toml"));
    let name = &cfg.scenarios[0].name;
    let beats = |seed: u64| {
        let (Some(l), Some(f)) = (out.find(name, Scheme::Ltfl, seed), out.find(name, Scheme::FedSgd, seed)) else {
            return false;
        };
        match (l.delay_to_target, l.energy_to_target, f.delay_to_target, f.energy_to_target) {
            (Some(ld), Some(le), Some(fd), Some(fe)) => ld <= fd && le <= fe,
            (Some(_), Some(_), None, None) => true,
            _ => false,
        }
    };
    let (hits, seeds) = tally(&cfg, beats);
    pass &= 2 * hits > seeds;
    parts.push(format!("(a) {hits}/{seeds} seeds"));

    // (b) final accuracy over fading coefficients.
    let (cfg, out) = try_or_fail!(run_sweep("channel_sweep.toml"));
    let mut detail = Vec::new();
    let (hits, seeds) = tally(&cfg, |seed| ordered(&series(&cfg, &out, seed, |s| s.final_accuracy), |a, b| a <= b));
    for &seed in &cfg.scenarios[0].seeds {
        detail.push(fmt_series(&series(&cfg, &out, seed, |s| s.final_accuracy), 4));
    }
    pass &= 2 * hits > seeds;
    parts.push(format!("(b) {hits}/{seeds} seeds [{}]", detail.join(", ")));

    // (c) delay to target over device counts.
    let (cfg, out) = try_or_fail!(run_sweep("device_sweep.toml"));
    let mut detail = Vec::new();
    let (hits, seeds) = tally(&cfg, |seed| ordered(&series(&cfg, &out, seed, |s| s.delay_to_target), |a, b| a >= b));
    for &seed in &cfg.scenarios[0].seeds {
        detail.push(fmt_series(&series(&cfg, &out, seed, |s| s.delay_to_target), 0));
    }
    pass &= 2 * hits > seeds;
    parts.push(format!("(c) {hits}/{seeds} seeds [{}]", detail.join(", ")));

    Verdict::new(pass, parts.join("; "))
}
