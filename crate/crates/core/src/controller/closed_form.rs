//! Closed-form pruning ratio and bit width for a single device.
//!
//! The gap grows linearly in `ρ` and shrinks in `δ`, so the best pruning ratio
//! is the smallest one that meets both budgets and the best bit width is the
//! largest one that does. Both have closed forms; each result is then checked
//! against [`device_cost`] and nudged past floating-point boundary noise so the
//! returned decision is feasible under exactly the arithmetic used for
//! accounting.

use crate::compression::payload_bits;
use crate::cost::{device_cost, Budgets, DeviceProfile};
use crate::error::{Error, Result};

/// Everything fixed about one device while its decisions are optimized.
#[derive(Debug, Clone, Copy)]
pub struct DeviceContext<'a> {
    pub index: usize,
    pub device: &'a DeviceProfile,
    pub budgets: &'a Budgets,
    pub model_dim: usize,
    pub overhead_bits: f64,
}

/// How many representable steps the feasibility guard may move a ratio.
const GUARD_STEPS: usize = 256;

impl DeviceContext<'_> {
    pub fn nominal_bits(&self, bits: u8) -> f64 {
        payload_bits(self.model_dim, f64::from(bits), self.overhead_bits)
    }

    /// Whether `(ρ, δ, p)` meets both budgets for this device.
    pub fn feasible(&self, pruning: f64, bits: u8, power: f64, rate: f64) -> bool {
        device_cost(self.device, pruning, self.nominal_bits(bits), power, rate).within(self.budgets)
    }

    fn infeasible(&self, reason: String) -> Error {
        Error::Infeasible {
            device: self.index,
            reason,
        }
    }
}

/// Smallest pruning ratio in `[0, max_pruning]` meeting both budgets at `(δ, p)`.
pub fn optimal_pruning(ctx: &DeviceContext<'_>, bits: u8, power: f64, rate: f64, max_pruning: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::invalid("rate", format!("must be positive, got {rate}")));
    }
    let d = ctx.device;
    let b = ctx.budgets;
    let payload = ctx.nominal_bits(bits);
    let delay_share = (b.max_delay - b.server_delay) / (d.training_time() + payload / rate);
    let energy_share = b.max_energy / (d.training_energy() + power * payload / rate);
    let mut pruning = (1.0 - delay_share.min(energy_share)).max(0.0);
    if pruning > max_pruning {
        return Err(ctx.infeasible(format!(
            "needs pruning ratio {pruning:.4} above the cap {max_pruning} at {bits} bits, {power} W"
        )));
    }
    for _ in 0..GUARD_STEPS {
        if ctx.feasible(pruning, bits, power, rate) {
            return Ok(pruning);
        }
        pruning = pruning.next_up();
        if pruning > max_pruning {
            break;
        }
    }
    Err(ctx.infeasible(format!("no pruning ratio up to {max_pruning} meets the budgets")))
}

/// Largest bit width in `[1, max_bits]` meeting both budgets at `(ρ, p)`.
pub fn optimal_bits(ctx: &DeviceContext<'_>, pruning: f64, power: f64, rate: f64, max_bits: u8) -> Result<u8> {
    if !(rate > 0.0) {
        return Err(Error::invalid("rate", format!("must be positive, got {rate}")));
    }
    if !(0.0..1.0).contains(&pruning) {
        return Err(Error::invalid("pruning", format!("{pruning} not in [0, 1)")));
    }
    let d = ctx.device;
    let b = ctx.budgets;
    let kept = 1.0 - pruning;
    let delay_bits = (b.max_delay - b.server_delay - d.training_time() * kept) * rate / kept;
    let energy_bits = (b.max_energy - d.training_energy() * kept) * rate / (power * kept);
    let dim = ctx.model_dim as f64;
    let cap = ((delay_bits - ctx.overhead_bits) / dim)
        .min((energy_bits - ctx.overhead_bits) / dim)
        .min(f64::from(max_bits))
        .floor();
    // The floor can land one step off when a budget binds exactly, so the
    // exact accounting below has the last word, including below one bit.
    let mut bits = if cap >= 1.0 { cap as u8 } else { 1 };
    while bits > 1 && !ctx.feasible(pruning, bits, power, rate) {
        bits -= 1;
    }
    while bits < max_bits && ctx.feasible(pruning, bits + 1, power, rate) {
        bits += 1;
    }
    if !ctx.feasible(pruning, bits, power, rate) {
        return Err(ctx.infeasible(format!("even one bit per coordinate breaks the budgets at ρ = {pruning}")));
    }
    Ok(bits)
}
