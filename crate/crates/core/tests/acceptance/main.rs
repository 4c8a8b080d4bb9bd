//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p ltfl-core --test acceptance -- 4 5`.

mod closed_form;
mod gradients;
mod instances;
mod quantizer;
mod search;
mod simulation;

use std::process::ExitCode;
use std::time::{Duration, Instant};

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Verdict,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "quantizer unbiasedness",
        limit: secs(30),
        run: quantizer::unbiasedness,
    },
    Criterion {
        id: 2,
        name: "quantizer variance bound",
        limit: None,
        run: quantizer::variance_bound,
    },
    Criterion {
        id: 3,
        name: "pruning error bound",
        limit: secs(5),
        run: closed_form::pruning_bound,
    },
    Criterion {
        id: 4,
        name: "pruning ratio vs grid search",
        limit: secs(60),
        run: closed_form::pruning_vs_grid,
    },
    Criterion {
        id: 5,
        name: "bit width vs enumeration",
        limit: secs(10),
        run: closed_form::bits_vs_enumeration,
    },
    Criterion {
        id: 6,
        name: "gap decreases in bits",
        limit: None,
        run: closed_form::gap_monotone_in_bits,
    },
    Criterion {
        id: 7,
        name: "power search vs grid",
        limit: secs(300),
        run: search::power_vs_grid,
    },
    Criterion {
        id: 8,
        name: "controller descent",
        limit: None,
        run: search::controller_descent,
    },
    Criterion {
        id: 9,
        name: "budget compliance over a full run",
        limit: None,
        run: simulation::budget_compliance,
    },
    Criterion {
        id: 10,
        name: "scheme and sweep orderings",
        limit: secs(30 * 60),
        run: simulation::orderings,
    },
    Criterion {
        id: 11,
        name: "loss gradients vs finite differences",
        limit: secs(10),
        run: gradients::finite_differences,
    },
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let verdict = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let pass = verdict.pass && in_time;
        let timing = match c.limit {
            Some(l) => format!("{:.1}s / {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!(
            "criterion {:>2} {}: {} ({}; {})",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            verdict.detail,
            timing
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
