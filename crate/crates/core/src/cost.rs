//! Delay and energy of one training round.
//!
//! A device spends `N c₀ (1 − ρ) / f` seconds on local training and
//! `δ̃ (1 − ρ) / R` seconds on the upload, where `δ̃` is the nominal payload.
//! Training energy follows the dynamic-power model `k f^σ` and upload energy is
//! transmit power times airtime. The round lasts as long as its slowest device
//! plus a fixed server-side time.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::compression::payload_bits;
use crate::error::{Error, Result};
use crate::strategy::ControlStrategy;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub n_samples: usize,
    /// CPU frequency in Hz.
    pub cpu_freq: f64,
    pub cycles_per_sample: f64,
    pub channel: ChannelParams,
    /// Effective switched capacitance `k`.
    pub energy_coeff: f64,
    /// Exponent `σ` in `k f^σ`.
    pub energy_exponent: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cpu_freq", self.cpu_freq),
            ("cycles_per_sample", self.cycles_per_sample),
            ("energy_coeff", self.energy_coeff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be positive"));
        }
        if !(self.energy_exponent >= 2.0) {
            return Err(Error::invalid("energy_exponent", format!("must be >= 2, got {}", self.energy_exponent)));
        }
        self.channel.validate()
    }

    /// Cycles needed for one unpruned pass over the local data, `N c₀`.
    pub fn workload(&self) -> f64 {
        self.n_samples as f64 * self.cycles_per_sample
    }

    /// Seconds of unpruned local training, `N c₀ / f`.
    pub fn training_time(&self) -> f64 {
        self.workload() / self.cpu_freq
    }

    /// Joules of unpruned local training, `k f^(σ−1) N c₀`.
    pub fn training_energy(&self) -> f64 {
        self.energy_coeff * self.cpu_freq.powf(self.energy_exponent - 1.0) * self.workload()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Per-round delay budget `T_max` in seconds.
    pub max_delay: f64,
    /// Per-device, per-round energy budget `E_max` in joules.
    pub max_energy: f64,
    /// Server aggregation and broadcast time `s` in seconds.
    #[serde(default = "default_server_delay")]
    pub server_delay: f64,
}

fn default_server_delay() -> f64 {
    0.05
}

impl Budgets {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_delay > 0.0 && self.max_energy > 0.0) {
            return Err(Error::invalid("budgets", "max_delay and max_energy must be positive"));
        }
        if !(self.server_delay >= 0.0 && self.server_delay < self.max_delay) {
            return Err(Error::invalid("server_delay", "must lie in [0, max_delay)"));
        }
        Ok(())
    }
}

/// Delay and energy of one device in one round.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeviceCost {
    pub train_time: f64,
    pub upload_time: f64,
    pub train_energy: f64,
    pub upload_energy: f64,
    pub energy: f64,
}

impl DeviceCost {
    pub fn busy_time(&self) -> f64 {
        self.train_time + self.upload_time
    }

    /// Whether this device alone keeps the round inside both budgets.
    pub fn within(&self, budgets: &Budgets) -> bool {
        self.busy_time() + budgets.server_delay <= budgets.max_delay && self.energy <= budgets.max_energy
    }
}

/// Cost of one device given its pruning ratio, nominal payload in bits,
/// transmit power and uplink rate.
pub fn device_cost(device: &DeviceProfile, pruning: f64, nominal_bits: f64, power: f64, rate: f64) -> DeviceCost {
    let kept = 1.0 - pruning;
    let train_time = device.training_time() * kept;
    let upload_time = nominal_bits * kept / rate;
    let train_energy = device.energy_coeff * device.cpu_freq.powf(device.energy_exponent) * train_time;
    let upload_energy = power * upload_time;
    DeviceCost {
        train_time,
        upload_time,
        train_energy,
        upload_energy,
        energy: train_energy + upload_energy,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundCostReport {
    pub devices: Vec<DeviceCost>,
    pub round_delay: f64,
    pub budgets: Budgets,
    pub feasible: bool,
}

impl RoundCostReport {
    pub fn total_energy(&self) -> f64 {
        self.devices.iter().map(|d| d.energy).sum()
    }

    pub fn max_device_energy(&self) -> f64 {
        self.devices.iter().map(|d| d.energy).fold(0.0, f64::max)
    }
}

/// Cost of a round where device `u` uploads `nominal_bits[u] · (1 − ρᵤ)` bits.
pub fn round_cost_with_payload(
    devices: &[DeviceProfile],
    pruning: &[f64],
    nominal_bits: &[f64],
    power: &[f64],
    rates: &[f64],
    budgets: &Budgets,
) -> Result<RoundCostReport> {
    let n = devices.len();
    for len in [pruning.len(), nominal_bits.len(), power.len(), rates.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    let costs: Vec<DeviceCost> = (0..n)
        .map(|u| device_cost(&devices[u], pruning[u], nominal_bits[u], power[u], rates[u]))
        .collect();
    let round_delay = costs.iter().map(DeviceCost::busy_time).fold(0.0, f64::max) + budgets.server_delay;
    let feasible = round_delay <= budgets.max_delay && costs.iter().all(|c| c.energy <= budgets.max_energy);
    Ok(RoundCostReport {
        devices: costs,
        round_delay,
        budgets: *budgets,
        feasible,
    })
}

/// Cost of a round under `strategy` with payload `V·δᵤ + ξ` per device.
pub fn round_cost(
    strategy: &ControlStrategy,
    devices: &[DeviceProfile],
    rates: &[f64],
    model_dim: usize,
    overhead_bits: f64,
    budgets: &Budgets,
) -> Result<RoundCostReport> {
    let nominal: Vec<f64> = strategy
        .bits
        .iter()
        .map(|&b| payload_bits(model_dim, f64::from(b), overhead_bits))
        .collect();
    round_cost_with_payload(devices, &strategy.pruning, &nominal, &strategy.power, rates, budgets)
}
