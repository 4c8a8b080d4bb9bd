//! Device sampler over the default ranges and independent cost / gap oracles.
//!
//! The oracles restate the delay, energy, rate, error-rate and gap formulas
//! from scratch so the checks do not lean on the library's own accounting.

use ltfl_core::{BoundConstants, Budgets, ChannelParams, ControlBox, DeviceProfile, GapModel, GradRange};
use rand::Rng;

pub const BANDWIDTH: f64 = 1e7;
pub const NOISE_PSD: f64 = 3.981e-21;
/// 0.023 dB.
pub const WATERFALL: f64 = 1.005_309_994_023_134_3;
pub const FADING: f64 = 0.015;
pub const CYCLES_PER_SAMPLE: f64 = 2.7e8;
pub const ENERGY_COEFF: f64 = 1.25e-26;
pub const ENERGY_EXPONENT: f64 = 3.0;
pub const SERVER_DELAY: f64 = 0.05;
pub const OVERHEAD_BITS: f64 = 96.0;

pub fn control_box() -> ControlBox {
    ControlBox {
        max_pruning: 0.5,
        max_bits: 8,
        min_power: 0.01,
        max_power: 0.1,
    }
}

pub fn device<R: Rng>(rng: &mut R) -> DeviceProfile {
    let channel = ChannelParams::deterministic(
        BANDWIDTH,
        NOISE_PSD,
        WATERFALL,
        rng.random_range(1e-8..2e-8),
        FADING,
        rng.random_range(100.0..300.0),
    )
    .unwrap();
    DeviceProfile {
        n_samples: rng.random_range(400..=600),
        cpu_freq: rng.random_range(3e7..1.1e8),
        cycles_per_sample: CYCLES_PER_SAMPLE,
        channel,
        energy_coeff: ENERGY_COEFF,
        energy_exponent: ENERGY_EXPONENT,
    }
}

/// Gap inputs with random gradient ranges; every device keeps `dim` coordinates.
pub fn gap_model<R: Rng>(rng: &mut R, devices: &[DeviceProfile], dim: usize) -> GapModel {
    let ranges = devices
        .iter()
        .map(|_| {
            let g_min = rng.random_range(0.0..0.01);
            GradRange {
                g_min,
                g_max: g_min + rng.random_range(0.05..1.0),
                kept: dim,
            }
        })
        .collect();
    GapModel::new(BoundConstants::default(), ranges, devices.iter().map(|d| d.n_samples).collect()).unwrap()
}

pub fn budgets(max_delay: f64, max_energy: f64) -> Budgets {
    Budgets {
        max_delay,
        max_energy,
        server_delay: SERVER_DELAY,
    }
}

/// Deterministic-fading rate in bit/s.
pub fn rate(d: &DeviceProfile, power: f64) -> f64 {
    let c = &d.channel;
    let gain = c.fading_coeff / (c.distance * c.distance);
    c.bandwidth_ul * (1.0 + power * gain / (c.interference + c.bandwidth_ul * c.noise_psd)).log2()
}

pub fn error_rate(d: &DeviceProfile, power: f64) -> f64 {
    let c = &d.channel;
    let gain = c.fading_coeff / (c.distance * c.distance);
    1.0 - (-c.waterfall_threshold * (c.interference + c.bandwidth_ul * c.noise_psd) / (power * gain)).exp()
}

pub fn train_time(d: &DeviceProfile) -> f64 {
    d.n_samples as f64 * d.cycles_per_sample / d.cpu_freq
}

pub fn train_energy(d: &DeviceProfile) -> f64 {
    d.energy_coeff * d.cpu_freq.powf(d.energy_exponent - 1.0) * d.n_samples as f64 * d.cycles_per_sample
}

pub fn payload(dim: usize, bits: f64) -> f64 {
    dim as f64 * bits + OVERHEAD_BITS
}

/// Delay and energy of one round for one device.
pub fn cost(d: &DeviceProfile, dim: usize, pruning: f64, bits: u8, power: f64) -> (f64, f64) {
    let r = rate(d, power);
    let kept = 1.0 - pruning;
    let bits = payload(dim, f64::from(bits));
    let delay = kept * (train_time(d) + bits / r);
    let energy = kept * (train_energy(d) + power * bits / r);
    (delay, energy)
}

/// Relative slack on the budgets. The library and the oracle evaluate the same
/// formulas in a different order, so a decision placed exactly on a budget
/// boundary can differ by an ulp or two between them.
pub const ROUNDING: f64 = 1e-12;

pub fn feasible(d: &DeviceProfile, b: &Budgets, dim: usize, pruning: f64, bits: u8, power: f64) -> bool {
    let (delay, energy) = cost(d, dim, pruning, bits, power);
    delay + b.server_delay <= b.max_delay * (1.0 + ROUNDING) && energy <= b.max_energy * (1.0 + ROUNDING)
}

/// One device's share of the gap; the gap is the sum of these shares.
pub fn gap_share(gap: &GapModel, u: usize, pruning: f64, bits: u8, per: f64) -> f64 {
    let c = &gap.constants;
    let r = &gap.ranges[u];
    let levels = 2f64.powi(i32::from(bits)) - 1.0;
    let total: f64 = gap.samples.iter().map(|&n| n as f64).sum();
    let quant = 3.0 * r.kept as f64 * (r.g_max - r.g_min).powi(2) / (4.0 * levels * levels);
    let prune = 3.0 * c.lipschitz.powi(2) * c.weight_bound_sq * pruning;
    let trans = 12.0 * c.upsilon1 * gap.samples[u] as f64 * per / total;
    (quant + prune + trans) / (1.0 - 12.0 * c.upsilon2)
}

pub fn gap(gap_model: &GapModel, devices: &[DeviceProfile], pruning: &[f64], bits: &[u8], power: &[f64]) -> f64 {
    (0..devices.len())
        .map(|u| gap_share(gap_model, u, pruning[u], bits[u], error_rate(&devices[u], power[u])))
        .sum()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
