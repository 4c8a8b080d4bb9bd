//! `ltfl`: run scenarios and sweeps, or self-check the numerical core.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ltfl_core::harness::{self, ScenarioConfig, Scheme, SweepConfig};

#[derive(Parser)]
#[command(name = "ltfl", version, about = "Federated learning with joint pruning, quantization and power control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario for every seed it lists (or just `--seed`).
    Run(RunArgs),
    /// Run every scheme on every scenario of a sweep file.
    Sweep(SweepArgs),
    /// Check the numerical core against independent references.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this seed instead of the ones in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scheme in the config.
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the controller trace.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Run this seed instead of the ones in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to these schemes; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Print one line per run.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also run this scenario and check every round against its budgets.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn print_summary(s: &ltfl_core::Summary) {
    println!(
        "{} {} seed {}: accuracy {} after {} rounds, target {} at round {}, delay {:.1} s, energy {:.3} J, {}",
        s.scenario,
        s.scheme,
        s.seed,
        fmt_opt(s.final_accuracy),
        s.rounds,
        s.target_accuracy,
        s.rounds_to_target.map_or_else(|| "-".into(), |r| r.to_string()),
        s.total_delay,
        s.total_energy,
        s.status
    );
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(scheme) = args.scheme {
        config.scheme = scheme;
    }
    let seeds = match args.seed {
        Some(seed) => vec![seed],
        None => config.seeds.clone(),
    };
    if seeds.is_empty() {
        bail!("no seeds to run; list some in the config or pass --seed");
    }
    let mut summaries = Vec::new();
    for &seed in &seeds {
        let record = harness::run_scheme(&config, config.scheme, seed)
            .with_context(|| format!("running `{}` with seed {seed}", config.name))?;
        let dir = if seeds.len() == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("seed-{seed}"))
        };
        harness::write_run(&dir, &record, args.verbose)?;
        let summary = record.summary();
        print_summary(&summary);
        summaries.push(summary);
    }
    if seeds.len() > 1 {
        harness::write_summaries(&args.out.join("summary.csv"), &summaries)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = SweepConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        for s in &mut config.scenarios {
            s.seeds = vec![seed];
        }
    }
    if !args.scheme.is_empty() {
        config.schemes = args.scheme.clone();
    }
    let outcome = harness::sweep(&config)?;
    outcome.write(&args.out)?;
    if args.verbose {
        outcome.summaries.iter().for_each(print_summary);
    }
    println!(
        "{} runs over {} scenarios; wrote {}",
        outcome.summaries.len(),
        config.scenarios.len(),
        args.out.display()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<bool> {
    let mut ok = true;
    for c in harness::self_checks(args.seed) {
        println!("{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        ok &= c.pass;
    }
    if let Some(path) = &args.config {
        ok &= check_scenario(path, args.seed, args.verbose)?;
    }
    Ok(ok)
}

/// Runs a scenario and checks every completed round against its budgets.
fn check_scenario(path: &Path, seed: u64, verbose: bool) -> Result<bool> {
    let config = ScenarioConfig::load(path)?;
    let record = harness::run_scheme(&config, config.scheme, seed)?;
    let b = &config.budgets;
    let over: Vec<usize> = record
        .rounds
        .iter()
        .filter(|r| r.status == harness::RoundStatus::Ok)
        .filter(|r| r.round_delay > b.max_delay || r.max_device_energy > b.max_energy)
        .map(|r| r.round)
        .collect();
    let pass = over.is_empty() && record.failure.is_none();
    println!(
        "{} stays inside budgets: {} ({} rounds, {} over budget)",
        config.name,
        if pass { "PASS" } else { "FAIL" },
        record.rounds.len(),
        over.len()
    );
    if verbose && !over.is_empty() {
        println!("rounds over budget: {over:?}");
    }
    Ok(pass)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args)?,
        Command::Sweep(args) => sweep(args)?,
        Command::Validate(args) => {
            if !validate(args)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
