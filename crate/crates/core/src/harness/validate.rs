//! Quick self-checks of the numerical core, run by `ltfl validate`.
//!
//! Each check compares a library routine against an independent reference
//! (enumeration, sampling, exact accounting) on a handful of seeded random
//! instances. They are smoke tests, far smaller than the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ScenarioConfig, Scheme};
use super::metrics::RoundStatus;
use super::run::run_scheme;
use crate::bound::{BoundConstants, GapModel, GradRange};
use crate::channel::ChannelParams;
use crate::compression::{quantize, variance_bound, GradientPacket, PruneMask};
use crate::controller::{optimal_bits, optimal_pruning, DeviceContext};
use crate::cost::{Budgets, DeviceProfile};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            pass,
            detail: detail.into(),
        }
    }
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

/// Runs every check with randomness derived from `seed`.
pub fn self_checks(seed: u64) -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("quantizer is unbiased", quantizer_unbiased),
        ("quantizer variance within bound", quantizer_variance),
        ("packet survives encode and decode", packet_round_trip),
        ("pruning ratio is the smallest feasible", pruning_is_tight),
        ("bit width matches enumeration", bits_match_enumeration),
        ("gap shrinks as bits grow", gap_monotone),
        ("short run stays inside budgets", short_run_budgets),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, &(name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            match check(&mut rng) {
                Ok((pass, detail)) => Check::new(name, pass, detail),
                Err(e) => Check::new(name, false, format!("error: {e}")),
            }
        })
        .collect()
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn quantizer_unbiased(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const DRAWS: usize = 4000;
    let x = random_vector(rng, 64);
    let mut sum = vec![0.0; x.len()];
    let mut first = None;
    for _ in 0..DRAWS {
        let q = quantize(&x, 3, rng)?;
        for (s, v) in sum.iter_mut().zip(q.values()) {
            *s += v;
        }
        first.get_or_insert(q);
    }
    let q = first.expect("at least one draw");
    let step = q.step();
    let mut worst: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        // Two-point rounding between neighbouring grid points.
        let frac = ((xi.abs() - q.g_min()) / step).fract();
        let se = step * (frac * (1.0 - frac) / DRAWS as f64).sqrt();
        let err = (sum[i] / DRAWS as f64 - xi).abs();
        if err > 1e-12 {
            worst = worst.max(err / se.max(f64::MIN_POSITIVE));
        }
    }
    Ok((worst <= 5.0, format!("largest deviation {worst:.2} standard errors")))
}

fn quantizer_variance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const DRAWS: usize = 2000;
    let x = random_vector(rng, 128);
    let mut worst_ratio: f64 = 0.0;
    for bits in [1u8, 2, 4, 8] {
        let mut mse = 0.0;
        let mut bound = 0.0;
        for _ in 0..DRAWS {
            let q = quantize(&x, bits, rng)?;
            mse += q.values().iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            bound = variance_bound(x.len(), q.g_min(), q.g_max(), bits);
        }
        worst_ratio = worst_ratio.max(mse / DRAWS as f64 / bound);
    }
    Ok((worst_ratio <= 1.0, format!("largest error / bound {worst_ratio:.3}")))
}

fn packet_round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let dense = random_vector(rng, 300);
    let scores: Vec<f64> = dense.iter().map(|v| v.abs()).collect();
    let mask = PruneMask::from_scores(&scores, 0.3)?;
    let quantized = quantize(&mask.gather(&dense), 5, rng)?;
    let packet = GradientPacket::new(7, 11, 96, mask, quantized)?;
    let back = GradientPacket::decode(&packet.encode())?;
    // The range travels as f32; everything else must survive exactly.
    let (a, b) = (&back.quantized, &packet.quantized);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * y.abs().max(1e-30);
    let same = back.mask == packet.mask
        && (back.device, back.round, back.overhead_bits) == (packet.device, packet.round, packet.overhead_bits)
        && a.levels() == b.levels()
        && a.negative() == b.negative()
        && a.bits() == b.bits()
        && close(a.g_min(), b.g_min())
        && close(a.g_max(), b.g_max());
    Ok((same, format!("{} bytes", packet.encoded_len())))
}

/// A device drawn from the default scenario ranges, with budgets around the
/// ones that bind at those ranges.
fn random_device(rng: &mut ChaCha8Rng) -> Result<(DeviceProfile, Budgets, f64)> {
    let defaults = ScenarioConfig::default();
    let ch = &defaults.channel;
    let dev = &defaults.device;
    let channel = ChannelParams::deterministic(
        ch.bandwidth_hz,
        ch.noise_psd(),
        ch.waterfall(),
        rng.random_range(ch.interference_w[0]..=ch.interference_w[1]),
        ch.fading_coeff,
        rng.random_range(ch.distance_m[0]..=ch.distance_m[1]),
    )?;
    let device = DeviceProfile {
        n_samples: rng.random_range(400..=600),
        cpu_freq: rng.random_range(dev.cpu_hz[0]..=dev.cpu_hz[1]),
        cycles_per_sample: dev.cycles_per_sample,
        channel,
        energy_coeff: dev.energy_coeff,
        energy_exponent: dev.energy_exponent,
    };
    let budgets = Budgets {
        max_delay: device.training_time() * rng.random_range(0.6..1.5) + 0.05,
        max_energy: device.training_energy() * rng.random_range(0.6..1.5),
        server_delay: 0.05,
    };
    let power = rng.random_range(0.01..=0.1);
    Ok((device, budgets, power))
}

fn pruning_is_tight(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut solved, mut wrong) = (0, 0);
    for _ in 0..200 {
        let (device, budgets, power) = random_device(rng)?;
        let ctx = DeviceContext {
            index: 0,
            device: &device,
            budgets: &budgets,
            model_dim: 210,
            overhead_bits: 96.0,
        };
        let bits = rng.random_range(1..=8);
        let rate = device.channel.uplink_rate(power);
        let Ok(rho) = optimal_pruning(&ctx, bits, power, rate, 0.5) else {
            // Only acceptable when the cap itself is infeasible.
            if ctx.feasible(0.5, bits, power, rate) {
                wrong += 1;
            }
            continue;
        };
        solved += 1;
        let below = rho * (1.0 - 1e-9) - 1e-12;
        if !ctx.feasible(rho, bits, power, rate) || (below >= 0.0 && ctx.feasible(below, bits, power, rate)) {
            wrong += 1;
        }
    }
    Ok((wrong == 0, format!("{solved} solved, {wrong} wrong")))
}

fn bits_match_enumeration(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut compared, mut wrong) = (0, 0);
    for _ in 0..200 {
        let (device, budgets, power) = random_device(rng)?;
        let ctx = DeviceContext {
            index: 0,
            device: &device,
            budgets: &budgets,
            model_dim: 210,
            overhead_bits: 96.0,
        };
        let rho = rng.random_range(0.0..0.5);
        let rate = device.channel.uplink_rate(power);
        let best = (1..=8u8).rev().find(|&b| ctx.feasible(rho, b, power, rate));
        let got = optimal_bits(&ctx, rho, power, rate, 8).ok();
        compared += 1;
        if got != best {
            wrong += 1;
        }
    }
    Ok((wrong == 0, format!("{compared} compared, {wrong} differ")))
}

fn gap_monotone(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let ranges = (0..5)
        .map(|_| {
            let lo = rng.random_range(0.0..0.1);
            GradRange {
                g_min: lo,
                g_max: lo + rng.random_range(0.01..1.0),
                kept: rng.random_range(10..500),
            }
        })
        .collect();
    let samples = (0..5).map(|_| rng.random_range(400..=600)).collect();
    let model = GapModel::new(BoundConstants::default(), ranges, samples)?;
    let ok = (0..model.devices()).all(|u| (1..8u8).all(|b| model.quantization_raw(u, b + 1) < model.quantization_raw(u, b)));
    Ok((ok, format!("{} devices, bits 1 to 8", model.devices())))
}

fn short_run_budgets(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut config = ScenarioConfig {
        name: "self-check".into(),
        devices: 5,
        rounds: 5,
        ..ScenarioConfig::default()
    };
    config.dataset.samples = 2000;
    config.budgets.max_delay = 3000.0;
    config.budgets.max_energy = 13.0;
    let record = run_scheme(&config, Scheme::Ltfl, rng.random())?;
    let b = &config.budgets;
    let slack = 1.0 + 1e-12;
    let violations = record
        .rounds
        .iter()
        .filter(|r| r.status == RoundStatus::Ok)
        .filter(|r| r.round_delay > b.max_delay * slack || r.max_device_energy > b.max_energy * slack)
        .count();
    Ok((
        violations == 0 && record.failure.is_none(),
        format!("{} rounds, {violations} over budget", record.rounds.len()),
    ))
}
