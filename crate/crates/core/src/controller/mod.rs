//! Joint choice of pruning ratio, quantization bits and transmit power.
//!
//! The controller alternates three steps until the gap stops improving: the
//! smallest feasible pruning ratio for each device at its current bits and
//! power, the largest feasible bit width at that ratio, and a Bayesian search
//! over the power vector with ratios and bits held fixed. Every step keeps
//! the previous decision feasible, so the best gap seen never increases.

mod bo;
mod closed_form;
mod gp;

pub use bo::{minimize, probability_of_improvement, shifted_halton, BoConfig, BoResult, Evaluation, ImprovementTarget};
pub use closed_form::{optimal_bits, optimal_pruning, DeviceContext};
pub use gp::{kernel, GpSurrogate};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bound::{GapModel, GapTerms};
use crate::cost::{round_cost, Budgets, DeviceProfile, RoundCostReport};
use crate::error::{Error, Result};
use crate::strategy::{ControlBox, ControlStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Maximum outer iterations.
    pub max_outer: usize,
    /// Stop once an outer iteration improves the best gap by at most this much.
    pub tolerance: f64,
    /// Starting power for every device; `None` means half the maximum.
    pub initial_power: Option<f64>,
    pub bo: BoConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            max_outer: 20,
            tolerance: 1e-4,
            initial_power: None,
            bo: BoConfig::default(),
        }
    }
}

/// A round's decision problem.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub devices: &'a [DeviceProfile],
    pub budgets: &'a Budgets,
    pub bounds: &'a ControlBox,
    pub gap: &'a GapModel,
    pub model_dim: usize,
    pub overhead_bits: f64,
}

impl Problem<'_> {
    pub fn validate(&self) -> Result<()> {
        self.budgets.validate()?;
        self.bounds.validate()?;
        if self.gap.devices() != self.devices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.devices.len(),
                actual: self.gap.devices(),
            });
        }
        if self.devices.is_empty() {
            return Err(Error::invalid("devices", "need at least one device"));
        }
        for d in self.devices {
            d.validate()?;
        }
        Ok(())
    }

    pub fn context(&self, u: usize) -> DeviceContext<'_> {
        DeviceContext {
            index: u,
            device: &self.devices[u],
            budgets: self.budgets,
            model_dim: self.model_dim,
            overhead_bits: self.overhead_bits,
        }
    }

    /// Packet error rates at the strategy's powers.
    pub fn error_rates(&self, strategy: &ControlStrategy) -> Vec<f64> {
        self.devices
            .iter()
            .zip(&strategy.power)
            .map(|(d, &p)| d.channel.packet_error_rate(p))
            .collect()
    }

    pub fn gap_terms(&self, strategy: &ControlStrategy) -> Result<GapTerms> {
        self.gap.terms(&strategy.pruning, &strategy.bits, &self.error_rates(strategy))
    }

    pub fn cost(&self, strategy: &ControlStrategy) -> Result<RoundCostReport> {
        let rates: Vec<f64> = self
            .devices
            .iter()
            .zip(&strategy.power)
            .map(|(d, &p)| d.channel.uplink_rate(p))
            .collect();
        round_cost(strategy, self.devices, &rates, self.model_dim, self.overhead_bits, self.budgets)
    }
}

/// One row of the controller trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Zero for the starting point, then one per outer iteration.
    pub iteration: usize,
    pub strategy: ControlStrategy,
    pub gamma: f64,
    pub best_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    pub strategy: ControlStrategy,
    pub terms: GapTerms,
    /// Gap after the first pruning and bit-width step, at the starting power.
    pub initial_gamma: f64,
    /// Devices that could not meet the budgets and run the fallback decision.
    pub degraded: Vec<usize>,
    pub trace: Vec<TraceRow>,
}

impl ControlOutcome {
    /// Best gap after each trace row.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.best_gamma).collect()
    }
}

/// Pruning then bits for device `u` at `(bits, power)`.
fn ratio_and_bits(problem: &Problem<'_>, u: usize, bits: u8, power: f64) -> Result<(f64, u8)> {
    let ctx = problem.context(u);
    let rate = ctx.device.channel.uplink_rate(power);
    let rho = optimal_pruning(&ctx, bits, power, rate, problem.bounds.max_pruning)?;
    let bits = optimal_bits(&ctx, rho, power, rate, problem.bounds.max_bits)?;
    Ok((rho, bits))
}

/// Tries the current decision, then one bit at the current, maximum and minimum power.
fn first_feasible(problem: &Problem<'_>, u: usize, bits: u8, power: f64) -> Option<(f64, u8, f64)> {
    let b = problem.bounds;
    [(bits, power), (1, power), (1, b.max_power), (1, b.min_power)]
        .into_iter()
        .find_map(|(bits, p)| ratio_and_bits(problem, u, bits, p).ok().map(|(r, d)| (r, d, p)))
}

/// Alternating pruning / bits / power optimization.
pub fn two_stage_control<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    config: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlOutcome> {
    problem.validate()?;
    let bounds = problem.bounds;
    let n = problem.devices.len();
    let start_power = bounds.clamp_power(config.initial_power.unwrap_or(0.5 * bounds.max_power));
    let mut current = ControlStrategy::uniform(n, 0.0, bounds.max_bits, start_power);

    let mut degraded = Vec::new();
    for u in 0..n {
        match first_feasible(problem, u, current.bits[u], current.power[u]) {
            Some((rho, bits, power)) => {
                current.pruning[u] = rho;
                current.bits[u] = bits;
                current.power[u] = power;
            }
            None => {
                current.pruning[u] = bounds.max_pruning;
                current.bits[u] = 1;
                current.power[u] = bounds.max_power;
                degraded.push(u);
            }
        }
    }
    let active: Vec<usize> = (0..n).filter(|u| !degraded.contains(u)).collect();

    let initial_gamma = problem.gap_terms(&current)?.gamma;
    let mut best = current.clone();
    let mut best_gamma = initial_gamma;
    let mut trace = vec![TraceRow {
        iteration: 0,
        strategy: current.clone(),
        gamma: initial_gamma,
        best_gamma,
    }];

    for k in 1..=config.max_outer {
        if k > 1 {
            for &u in &active {
                // The current decision is feasible, so this only fails on
                // boundary rounding; the device then keeps its decision.
                if let Ok((rho, bits)) = ratio_and_bits(problem, u, current.bits[u], current.power[u]) {
                    current.pruning[u] = rho;
                    current.bits[u] = bits;
                }
            }
        }
        if !active.is_empty() {
            current.power = search_power(problem, &current, &active, &config.bo, rng)?;
        }
        let gamma = problem.gap_terms(&current)?.gamma;
        let previous = best_gamma;
        if gamma < best_gamma {
            best_gamma = gamma;
            best = current.clone();
        }
        trace.push(TraceRow {
            iteration: k,
            strategy: current.clone(),
            gamma,
            best_gamma,
        });
        if previous - best_gamma <= config.tolerance {
            break;
        }
    }

    let terms = problem.gap_terms(&best)?;
    Ok(ControlOutcome {
        strategy: best,
        terms,
        initial_gamma,
        degraded,
        trace,
    })
}

/// Powers meeting both budgets at fixed `(ρ, δ)`, found by bisecting outwards
/// from a feasible `start`. Delay falls and upload energy rises with power,
/// so the feasible powers form one interval.
fn power_interval(ctx: &DeviceContext<'_>, pruning: f64, bits: u8, start: f64, bounds: &ControlBox) -> (f64, f64) {
    let ok = |p: f64| ctx.feasible(pruning, bits, p, ctx.device.channel.uplink_rate(p));
    let edge = |mut inside: f64, mut outside: f64| {
        if ok(outside) {
            return outside;
        }
        for _ in 0..64 {
            let mid = 0.5 * (inside + outside);
            if ok(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    if !ok(start) {
        return (bounds.min_power, bounds.max_power);
    }
    (edge(start, bounds.min_power), edge(start, bounds.max_power))
}

/// Bayesian search over the powers of `active` devices with ratios, bits and
/// the other powers taken from `fixed`. Each device is searched only over the
/// powers its budgets allow, so the surrogate rarely sees a penalty. Returns
/// the full power vector; it equals `fixed.power` when nothing feasible was
/// found.
pub fn search_power<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    fixed: &ControlStrategy,
    active: &[usize],
    config: &BoConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let bounds = problem.bounds;
    let mut searched = Vec::with_capacity(active.len());
    let mut lower = Vec::with_capacity(active.len());
    let mut upper = Vec::with_capacity(active.len());
    for &u in active {
        let (lo, hi) = power_interval(&problem.context(u), fixed.pruning[u], fixed.bits[u], fixed.power[u], bounds);
        if hi - lo > 1e-9 * bounds.max_power {
            searched.push(u);
            lower.push(lo);
            upper.push(hi);
        }
    }
    if searched.is_empty() {
        return Ok(fixed.power.clone());
    }

    let mut trial = fixed.clone();
    let mut objective = |p: &[f64]| -> Result<Evaluation> {
        for (&u, &power) in searched.iter().zip(p) {
            let power = bounds.clamp_power(power);
            let ctx = problem.context(u);
            let rate = ctx.device.channel.uplink_rate(power);
            if !ctx.feasible(trial.pruning[u], trial.bits[u], power, rate) {
                return Ok(Evaluation::Infeasible);
            }
            trial.power[u] = power;
        }
        Ok(Evaluation::Feasible(problem.gap_terms(&trial)?.gamma))
    };
    let incumbent: Vec<f64> = searched.iter().map(|&u| fixed.power[u]).collect();
    let result = minimize(&mut objective, &lower, &upper, &[incumbent], config, rng)?;
    let mut power = fixed.power.clone();
    if result.feasible {
        for (&u, &p) in searched.iter().zip(&result.best_point) {
            power[u] = bounds.clamp_power(p);
        }
    }
    Ok(power)
}
