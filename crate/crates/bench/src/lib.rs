//! Seeded inputs shared by the benchmarks, kept here so their shape is tested.

use ltfl_core::bound::{BoundConstants, GapModel, GradRange};
use ltfl_core::channel::ChannelParams;
use ltfl_core::harness::ScenarioConfig;
use ltfl_core::{Budgets, ControlBox, DeviceProfile, Problem, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Model size of the default scenario: 20 features, 10 classes, with bias.
pub const MODEL_DIM: usize = 210;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A dense gradient with entries in `[-1, 1)`.
pub fn gradient(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Points in the unit cube with smooth values, as the power search feeds its surrogate.
pub fn surrogate_data(points: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let xs: Vec<Vec<f64>> = (0..points).map(|_| (0..dim).map(|_| r.random()).collect()).collect();
    let ys = xs.iter().map(|x| x.iter().map(|v| (3.0 * v).sin()).sum()).collect();
    (xs, ys)
}

/// A round's decision problem over `devices` devices drawn from the default
/// scenario ranges.
pub struct ControlFixture {
    pub devices: Vec<DeviceProfile>,
    pub budgets: Budgets,
    pub bounds: ControlBox,
    pub gap: GapModel,
}

impl ControlFixture {
    pub fn new(devices: usize, seed: u64) -> Result<Self> {
        let config = ScenarioConfig::default();
        let ch = &config.channel;
        let dev = &config.device;
        let mut r = rng(seed);
        let profiles = (0..devices)
            .map(|_| {
                let channel = ChannelParams::deterministic(
                    ch.bandwidth_hz,
                    ch.noise_psd(),
                    ch.waterfall(),
                    r.random_range(ch.interference_w[0]..=ch.interference_w[1]),
                    ch.fading_coeff,
                    r.random_range(ch.distance_m[0]..=ch.distance_m[1]),
                )?;
                Ok(DeviceProfile {
                    n_samples: r.random_range(400..=600),
                    cpu_freq: r.random_range(dev.cpu_hz[0]..=dev.cpu_hz[1]),
                    cycles_per_sample: dev.cycles_per_sample,
                    channel,
                    energy_coeff: dev.energy_coeff,
                    energy_exponent: dev.energy_exponent,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ranges = (0..devices)
            .map(|_| {
                let g_min = r.random_range(0.0..1e-3);
                GradRange {
                    g_min,
                    g_max: g_min + r.random_range(0.05..0.5),
                    kept: MODEL_DIM,
                }
            })
            .collect();
        let samples = profiles.iter().map(|d| d.n_samples).collect();
        let gap = GapModel::new(BoundConstants::default(), ranges, samples)?;
        Ok(Self {
            devices: profiles,
            budgets: Budgets {
                max_delay: 3000.0,
                max_energy: 13.0,
                server_delay: 0.05,
            },
            bounds: ControlBox::default(),
            gap,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            devices: &self.devices,
            budgets: &self.budgets,
            bounds: &self.bounds,
            gap: &self.gap,
            model_dim: MODEL_DIM,
            overhead_bits: 96.0,
        }
    }
}
