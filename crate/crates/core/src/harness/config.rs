//! Scenario configuration.
//!
//! A scenario is a TOML document. Every table has defaults matching the
//! reference parameter set, so an empty file is a valid 30-device scenario.
//! Units are SI unless the key says otherwise; `*_db` and `*_dbm_hz` keys are
//! converted to linear scale when the device profiles are built.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bound::BoundConstants;
use crate::channel::{db_to_linear, dbm_to_watts, FadingMode};
use crate::compression::DEFAULT_OVERHEAD_BITS;
use crate::controller::ControllerConfig;
use crate::cost::Budgets;
use crate::error::{Error, Result};
use crate::strategy::ControlBox;

/// Training and upload scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Controlled pruning, quantization and power.
    Ltfl,
    /// Full-precision gradients at a fixed power.
    FedSgd,
    /// One sign bit per coordinate.
    SignSgd,
    /// Top-k sparsification with a single shared magnitude. A simplified
    /// stand-in for sparse ternary compression: no position coding and no
    /// downstream compression.
    StcLite,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ltfl, Scheme::FedSgd, Scheme::SignSgd, Scheme::StcLite];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ltfl => "ltfl",
            Scheme::FedSgd => "fedsgd",
            Scheme::SignSgd => "signsgd",
            Scheme::StcLite => "stclite",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`; expected ltfl, fedsgd, signsgd or stclite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Seeded Gaussian blobs.
    Blobs,
    /// Delimited text file, label in the first column.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Total samples generated, training and test together.
    pub samples: usize,
    pub classes: usize,
    pub features: usize,
    /// Standard deviation of the class centres.
    pub separation: f64,
    /// Within-class standard deviation.
    pub noise: f64,
    pub path: Option<PathBuf>,
    pub delimiter: char,
    /// Share of the samples held out for test accuracy.
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Blobs,
            samples: 10_000,
            classes: 10,
            features: 20,
            separation: 1.0,
            noise: 1.0,
            path: None,
            delimiter: ',',
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Iid,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub kind: PartitionKind,
    /// Dirichlet concentration; ignored for IID.
    pub alpha: f64,
    /// Per-device sample counts are drawn from `[min_samples, max_samples]`.
    pub min_samples: usize,
    pub max_samples: usize,
    /// Rescale the drawn counts so they add up to the training set.
    pub scale_to_dataset: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            kind: PartitionKind::Iid,
            alpha: 0.1,
            min_samples: 400,
            max_samples: 600,
            scale_to_dataset: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Hidden width of the MLP.
    pub hidden: usize,
    /// Standard deviation of the initial weights; zero starts from the origin.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Logistic,
            hidden: 16,
            init_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Waterfall threshold of the packet error model, in dB.
    pub waterfall_db: f64,
    /// Mean fading coefficient at 1 m.
    pub fading_coeff: f64,
    /// Distance range in metres.
    pub distance_m: [f64; 2],
    /// Interference range in watts.
    pub interference_w: [f64; 2],
    pub fading: FadingMode,
    /// Monte-Carlo samples per expectation under Rayleigh fading.
    pub mc_samples: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e7,
            noise_psd_dbm_hz: -174.0,
            waterfall_db: 0.023,
            fading_coeff: 0.015,
            distance_m: [100.0, 300.0],
            interference_w: [1e-8, 2e-8],
            fading: FadingMode::Deterministic,
            mc_samples: 256,
        }
    }
}

impl ChannelConfig {
    pub fn noise_psd(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz)
    }

    pub fn waterfall(&self) -> f64 {
        db_to_linear(self.waterfall_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    /// CPU frequency range in Hz.
    pub cpu_hz: [f64; 2],
    pub cycles_per_sample: f64,
    /// Effective switched capacitance.
    pub energy_coeff: f64,
    pub energy_exponent: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            cpu_hz: [3e7, 1.1e8],
            cycles_per_sample: 2.7e8,
            energy_coeff: 1.25e-26,
            energy_exponent: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignRule {
    /// Mean of the received sign vectors.
    Mean,
    /// Sign of the sum of the received sign vectors.
    Majority,
}

/// Settings of the fixed-decision schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Transmit power as a fraction of the maximum power.
    pub power_fraction: f64,
    /// Server step size of the sign scheme.
    pub sign_step: f64,
    pub sign_rule: SignRule,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            power_fraction: 0.5,
            sign_step: 0.01,
            sign_rule: SignRule::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub devices: usize,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub scheme: Scheme,
    pub target_accuracy: f64,
    /// Rounds between controller calls; the decision is held in between.
    pub control_interval: usize,
    /// Per-packet overhead in bits.
    pub overhead_bits: f64,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub model: ModelConfig,
    pub channel: ChannelConfig,
    pub device: DeviceConfig,
    pub budgets: Budgets,
    pub control: ControlBox,
    pub bound: BoundConstants,
    pub controller: ControllerConfig,
    pub baseline: BaselineConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            devices: 30,
            rounds: 200,
            seeds: vec![1],
            scheme: Scheme::Ltfl,
            target_accuracy: 0.85,
            control_interval: 1,
            overhead_bits: DEFAULT_OVERHEAD_BITS,
            dataset: DatasetConfig::default(),
            partition: PartitionConfig::default(),
            model: ModelConfig::default(),
            channel: ChannelConfig::default(),
            device: DeviceConfig::default(),
            budgets: Budgets {
                max_delay: 2000.0,
                max_energy: 8.0,
                server_delay: 0.05,
            },
            control: ControlBox::default(),
            bound: BoundConstants::default(),
            controller: ControllerConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<()> {
    check(r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[0] <= r[1], || {
        format!("{name} must be an ordered range above {min}, got {r:?}")
    })
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check(self.devices >= 1, || "devices must be at least 1".into())?;
        check(self.rounds <= u32::MAX as usize, || "rounds must fit in 32 bits".into())?;
        check(!self.seeds.is_empty(), || "seeds must not be empty".into())?;
        check(self.control_interval >= 1, || "control_interval must be at least 1".into())?;
        check((0.0..=1.0).contains(&self.target_accuracy), || {
            format!("target_accuracy must lie in [0, 1], got {}", self.target_accuracy)
        })?;
        check(self.overhead_bits >= 0.0 && self.overhead_bits.is_finite(), || {
            "overhead_bits must be finite and >= 0".into()
        })?;

        let d = &self.dataset;
        check(d.test_fraction > 0.0 && d.test_fraction < 1.0, || {
            format!("dataset.test_fraction must lie in (0, 1), got {}", d.test_fraction)
        })?;
        match d.kind {
            DatasetKind::Blobs => check(d.samples >= 2 && d.classes >= 2 && d.features >= 1, || {
                "blobs need samples >= 2, classes >= 2, features >= 1".into()
            })?,
            DatasetKind::File => check(d.path.is_some(), || "dataset.kind = \"file\" needs dataset.path".into())?,
        }
        check(d.delimiter.is_ascii(), || "dataset.delimiter must be ASCII".into())?;

        let p = &self.partition;
        check(p.kind == PartitionKind::Iid || (p.alpha > 0.0 && p.alpha.is_finite()), || {
            format!("partition.alpha must be positive, got {}", p.alpha)
        })?;
        check(p.min_samples >= 1 && p.min_samples <= p.max_samples, || {
            "partition needs 1 <= min_samples <= max_samples".into()
        })?;

        check(self.model.kind == ModelKind::Logistic || self.model.hidden >= 1, || {
            "model.hidden must be at least 1".into()
        })?;
        check(self.model.init_scale >= 0.0 && self.model.init_scale.is_finite(), || {
            "model.init_scale must be finite and >= 0".into()
        })?;

        let c = &self.channel;
        check(c.bandwidth_hz > 0.0 && c.fading_coeff > 0.0 && c.mc_samples >= 1, || {
            "channel bandwidth, fading coefficient and mc_samples must be positive".into()
        })?;
        check(c.noise_psd_dbm_hz.is_finite() && c.waterfall_db.is_finite(), || {
            "channel dB values must be finite".into()
        })?;
        check_range("channel.distance_m", c.distance_m, f64::MIN_POSITIVE)?;
        check_range("channel.interference_w", c.interference_w, 0.0)?;

        let dev = &self.device;
        check_range("device.cpu_hz", dev.cpu_hz, f64::MIN_POSITIVE)?;
        check(dev.cycles_per_sample > 0.0 && dev.energy_coeff > 0.0 && dev.energy_exponent >= 1.0, || {
            "device cycles, energy coefficient and exponent must be positive".into()
        })?;

        self.budgets.validate()?;
        self.control.validate()?;
        self.bound.validate()?;

        let b = &self.baseline;
        check(b.power_fraction > 0.0 && b.power_fraction <= 1.0, || {
            format!("baseline.power_fraction must lie in (0, 1], got {}", b.power_fraction)
        })?;
        check(b.sign_step > 0.0 && b.sign_step.is_finite(), || "baseline.sign_step must be positive".into())?;
        Ok(())
    }

    /// Fixed transmit power of the baseline schemes.
    pub fn baseline_power(&self) -> f64 {
        self.control.clamp_power(self.baseline.power_fraction * self.control.max_power)
    }

    /// Number of held-out test samples.
    pub fn test_samples(&self, total: usize) -> usize {
        ((total as f64 * self.dataset.test_fraction).round() as usize).clamp(1, total.saturating_sub(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.devices, 30);
        assert!((c.channel.noise_psd() - 3.981e-21).abs() < 1e-24);
        assert!((c.channel.waterfall() - 1.005_309_994).abs() < 1e-9);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ScenarioConfig {
            scheme: Scheme::StcLite,
            ..ScenarioConfig::default()
        };
        c.partition.kind = PartitionKind::Dirichlet;
        let back = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        for doc in [
            "devices = 0",
            "seeds = []",
            "[partition]\nkind = \"dirichlet\"\nalpha = 0.0",
            "[channel]\ndistance_m = [300.0, 100.0]",
            "[bound]\nlipschitz = 1.0\nweight_bound_sq = 1.0\nupsilon1 = 1.0\nupsilon2 = 0.1",
            "unknown_key = 1",
            "[dataset]\nkind = \"file\"",
        ] {
            assert!(ScenarioConfig::from_toml(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("FedSGD".parse::<Scheme>().unwrap(), Scheme::FedSgd);
        assert!("fedavg".parse::<Scheme>().is_err());
    }
}
