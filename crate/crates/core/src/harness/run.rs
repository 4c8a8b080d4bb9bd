//! The round loop: build a scenario once, then run any scheme on it.
//!
//! Every draw comes from a stream keyed by seed, device, round and purpose,
//! so all schemes of one seed see the same data, devices and channel coins.

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{DatasetKind, ModelKind, ScenarioConfig, Scheme, SignRule};
use super::metrics::{DeviceRound, RoundMetrics, RoundStatus, Summary, TraceRecord};
use super::partition::partition_data;
use crate::bound::{GapModel, GapTerms, GradRange};
use crate::channel::{ChannelParams, FadingMode};
use crate::compression::{dequantize, payload_bits, prune, pruned_count, quantize};
use crate::controller::{two_stage_control, Problem};
use crate::cost::{round_cost_with_payload, DeviceProfile};
use crate::error::{Error, Result};
use crate::fl::{
    accuracy, aggregate, apply_update, global_loss, load_delimited, local_gradient, Contribution, Dataset,
    DeviceDataset, GaussianBlobs, LogisticRegression, LossModel, Mlp, ModelVector, Sample,
};
use crate::rng::{global_stream, stream, Purpose, GLOBAL};
use crate::strategy::ControlStrategy;

/// Bits per full-precision coordinate.
const FLOAT_BITS: f64 = 32.0;

/// Data, devices and initial model of one scenario and seed.
pub struct Setup {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub model: Box<dyn LossModel>,
    pub profiles: Vec<DeviceProfile>,
    pub data: Vec<DeviceDataset>,
    pub test: Vec<Sample>,
    pub initial: ModelVector,
}

/// What the server sees in one round, before the update is applied.
pub struct RoundView<'a> {
    pub round: usize,
    pub weights: &'a ModelVector,
    /// Decision in force; controlled scheme only.
    pub strategy: Option<&'a ControlStrategy>,
    pub received: &'a [bool],
    /// Update direction; `None` if every upload was lost.
    pub update: Option<&'a [f64]>,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub target_accuracy: f64,
    pub rounds: Vec<RoundMetrics>,
    pub devices: Vec<DeviceRound>,
    pub trace: Vec<TraceRecord>,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn summary(&self) -> Summary {
        Summary::from_rounds(
            &self.scenario,
            self.scheme,
            self.seed,
            self.target_accuracy,
            &self.rounds,
            self.failure.as_deref(),
        )
    }
}

fn load_dataset(config: &ScenarioConfig, seed: u64) -> Result<Dataset> {
    let d = &config.dataset;
    let mut rng = global_stream(seed, Purpose::Dataset);
    match d.kind {
        DatasetKind::Blobs => GaussianBlobs {
            n_classes: d.classes,
            n_features: d.features,
            separation: d.separation,
            noise: d.noise,
        }
        .generate(d.samples, &mut rng),
        DatasetKind::File => {
            let path = d.path.as_deref().ok_or_else(|| Error::Config("dataset.path is not set".into()))?;
            let mut data = load_delimited(path, d.delimiter as u8)?;
            data.samples.shuffle(&mut rng);
            Ok(data)
        }
    }
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    rng.random_range(range[0]..=range[1])
}

fn device_profile(config: &ScenarioConfig, seed: u64, u: usize, n_samples: usize) -> Result<DeviceProfile> {
    let mut rng = stream(seed, u as u32, 0, Purpose::DeviceProfile);
    let c = &config.channel;
    let distance = sample_range(&mut rng, c.distance_m);
    let interference = sample_range(&mut rng, c.interference_w);
    let cpu_freq = sample_range(&mut rng, config.device.cpu_hz);
    let mut channel = ChannelParams::deterministic(
        c.bandwidth_hz,
        c.noise_psd(),
        c.waterfall(),
        interference,
        c.fading_coeff,
        distance,
    )?;
    if c.fading == FadingMode::RayleighMeanScaled {
        let mc_seed = stream(seed, u as u32, 0, Purpose::Fading).random();
        channel = channel.with_rayleigh(c.mc_samples, mc_seed)?;
    }
    let profile = DeviceProfile {
        n_samples,
        cpu_freq,
        cycles_per_sample: config.device.cycles_per_sample,
        channel,
        energy_coeff: config.device.energy_coeff,
        energy_exponent: config.device.energy_exponent,
    };
    profile.validate()?;
    Ok(profile)
}

/// One device's upload before the channel.
struct Upload {
    gradient: Vec<f64>,
    /// Payload in bits before the pruning share is applied.
    nominal_bits: f64,
    /// Share of the local model that is not trained.
    pruning: f64,
}

fn ensure_finite(g: &[f64], u: usize) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalDivergence(format!("device {u} computed a non-finite gradient")))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Top-k coordinates by magnitude, all sent as `±μ` with `μ` their mean magnitude.
fn top_k_ternary(g: &[f64], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    let top = &order[..k.min(g.len())];
    let mu = if top.is_empty() {
        0.0
    } else {
        top.iter().map(|&i| g[i].abs()).sum::<f64>() / top.len() as f64
    };
    let mut out = vec![0.0; g.len()];
    for &i in top {
        out[i] = mu * sign(g[i]);
    }
    out
}

/// Server rule of the sign scheme over the received sign vectors.
fn sign_aggregate(uploads: &[Upload], received: &[bool], rule: SignRule) -> Result<Vec<f64>> {
    let arrived: Vec<&Upload> = uploads.iter().zip(received).filter(|(_, &r)| r).map(|(u, _)| u).collect();
    let Some(first) = arrived.first() else {
        return Err(Error::EmptyRound);
    };
    let mut sum = vec![0.0; first.gradient.len()];
    for up in &arrived {
        sum.iter_mut().zip(&up.gradient).for_each(|(s, g)| *s += g);
    }
    match rule {
        SignRule::Mean => sum.iter_mut().for_each(|s| *s /= arrived.len() as f64),
        SignRule::Majority => sum.iter_mut().for_each(|s| *s = sign(*s)),
    }
    Ok(sum)
}

impl Setup {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let dataset = load_dataset(config, seed)?;
        let test_len = config.test_samples(dataset.len());
        let (train, test) = dataset.split_test(test_len)?;
        let data = partition_data(
            &train,
            config.devices,
            &config.partition,
            &mut global_stream(seed, Purpose::Partition),
        )?;
        let profiles = data
            .iter()
            .enumerate()
            .map(|(u, d)| device_profile(config, seed, u, d.len()))
            .collect::<Result<Vec<_>>>()?;

        let features = train.n_features();
        let classes = train.n_classes;
        let model: Box<dyn LossModel> = match config.model.kind {
            ModelKind::Logistic => Box::new(LogisticRegression::new(features, classes)?),
            ModelKind::Mlp => {
                if config.model.init_scale <= 0.0 {
                    return Err(Error::Config("an MLP needs model.init_scale > 0 to break symmetry".into()));
                }
                Box::new(Mlp::new(features, config.model.hidden, classes)?)
            }
        };
        let initial = if config.model.init_scale > 0.0 {
            ModelVector::random(model.dim(), config.model.init_scale, &mut global_stream(seed, Purpose::ModelInit))?
        } else {
            ModelVector::zeros(model.dim())?
        };
        Ok(Self {
            config: config.clone(),
            seed,
            model,
            profiles,
            data,
            test: test.samples,
            initial,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    fn sizes(&self) -> Vec<usize> {
        self.data.iter().map(DeviceDataset::len).collect()
    }

    /// Controller decision for the model `w` in round `round`.
    fn control(&self, w: &ModelVector, round: usize) -> Result<(ControlStrategy, GapTerms, usize, Vec<TraceRecord>)> {
        let ranges = self
            .data
            .iter()
            .map(|d| local_gradient(self.model.as_ref(), w, d).map(|g| GradRange::of(&g)))
            .collect::<Result<Vec<_>>>()?;
        let gap = GapModel::new(self.config.bound, ranges, self.sizes())?;
        let problem = Problem {
            devices: &self.profiles,
            budgets: &self.config.budgets,
            bounds: &self.config.control,
            gap: &gap,
            model_dim: self.dim(),
            overhead_bits: self.config.overhead_bits,
        };
        let mut rng = stream(self.seed, GLOBAL, round as u32, Purpose::Controller);
        let outcome = two_stage_control(&problem, &self.config.controller, &mut rng)?;
        let trace = outcome
            .trace
            .iter()
            .flat_map(|row| {
                (0..row.strategy.len()).map(move |u| TraceRecord {
                    round,
                    iteration: row.iteration,
                    device: u,
                    pruning: row.strategy.pruning[u],
                    bits: row.strategy.bits[u],
                    power: row.strategy.power[u],
                    gamma: row.gamma,
                    best_gamma: row.best_gamma,
                })
            })
            .collect();
        Ok((outcome.strategy, outcome.terms, outcome.degraded.len(), trace))
    }

    fn encode(&self, scheme: Scheme, w: &ModelVector, u: usize, round: usize, strategy: Option<&ControlStrategy>) -> Result<Upload> {
        let model = self.model.as_ref();
        let dim = self.dim();
        let xi = self.config.overhead_bits;
        match (scheme, strategy) {
            (Scheme::Ltfl, Some(s)) => {
                let (pruned, mask) = prune(w, s.pruning[u])?;
                let g = local_gradient(model, &pruned, &self.data[u])?;
                ensure_finite(&g, u)?;
                let mut rng = stream(self.seed, u as u32, round as u32, Purpose::Quantization);
                let q = quantize(&mask.gather(&g), s.bits[u], &mut rng)?;
                Ok(Upload {
                    gradient: dequantize(&q, &mask)?,
                    nominal_bits: payload_bits(dim, f64::from(s.bits[u]), xi),
                    pruning: s.pruning[u],
                })
            }
            (Scheme::Ltfl, None) => Err(Error::Config("controlled scheme ran without a decision".into())),
            (Scheme::FedSgd, _) => {
                let g = local_gradient(model, w, &self.data[u])?;
                ensure_finite(&g, u)?;
                Ok(Upload {
                    gradient: g,
                    nominal_bits: payload_bits(dim, FLOAT_BITS, xi),
                    pruning: 0.0,
                })
            }
            (Scheme::SignSgd, _) => {
                let g = local_gradient(model, w, &self.data[u])?;
                ensure_finite(&g, u)?;
                Ok(Upload {
                    gradient: g.into_iter().map(sign).collect(),
                    nominal_bits: payload_bits(dim, 1.0, xi),
                    pruning: 0.0,
                })
            }
            (Scheme::StcLite, _) => {
                let g = local_gradient(model, w, &self.data[u])?;
                ensure_finite(&g, u)?;
                let k = dim - pruned_count(dim, self.config.control.max_pruning);
                // One sign bit per kept coordinate, a position bitmap and the shared magnitude.
                let bits = k as f64 + dim as f64 + FLOAT_BITS + xi;
                Ok(Upload {
                    gradient: top_k_ternary(&g, k),
                    nominal_bits: bits,
                    pruning: 0.0,
                })
            }
        }
    }

    pub fn run(&self, scheme: Scheme) -> Result<RunRecord> {
        self.run_observed(scheme, |_| {})
    }

    /// Runs `scheme`, calling `observe` once per round before the update.
    ///
    /// A non-finite gradient or model ends the run early; the rounds so far are
    /// kept, the last one marked diverged, and the reason stored in `failure`.
    pub fn run_observed(&self, scheme: Scheme, mut observe: impl FnMut(&RoundView<'_>)) -> Result<RunRecord> {
        let cfg = &self.config;
        let n_dev = self.profiles.len();
        let model = self.model.as_ref();
        let sizes = self.sizes();
        let mut record = RunRecord {
            scenario: cfg.name.clone(),
            scheme,
            seed: self.seed,
            target_accuracy: cfg.target_accuracy,
            rounds: Vec::with_capacity(cfg.rounds),
            devices: Vec::new(),
            trace: Vec::new(),
            failure: None,
        };

        let mut w = self.initial.clone();
        let step = match scheme {
            Scheme::SignSgd => cfg.baseline.sign_step,
            _ => cfg.bound.step_size(),
        };
        let fixed_power = cfg.baseline_power();
        let mut decision: Option<(ControlStrategy, GapTerms, usize)> = None;
        let mut cumulative_delay = 0.0;
        let mut cumulative_energy = 0.0;

        for round in 1..=cfg.rounds {
            if scheme == Scheme::Ltfl && (round - 1) % cfg.control_interval == 0 {
                let (strategy, terms, degraded, trace) = self.control(&w, round)?;
                record.trace.extend(trace);
                decision = Some((strategy, terms, degraded));
            }
            let strategy = decision.as_ref().map(|d| &d.0);

            let mut uploads = Vec::with_capacity(n_dev);
            let mut diverged = None;
            for u in 0..n_dev {
                match self.encode(scheme, &w, u, round, strategy) {
                    Ok(up) => uploads.push(up),
                    Err(Error::NumericalDivergence(msg)) => {
                        diverged = Some(msg);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if let Some(msg) = diverged {
                record.failure = Some(format!("diverged at round {round}: {msg}"));
                let terms = decision.as_ref().map(|d| d.1);
                record.rounds.push(RoundMetrics {
                    round,
                    test_accuracy: f64::NAN,
                    train_loss: f64::NAN,
                    gamma: terms.map(|t| t.gamma),
                    gamma_quantization: terms.map(|t| t.quantization),
                    gamma_pruning: terms.map(|t| t.pruning),
                    gamma_transmission: terms.map(|t| t.transmission),
                    round_delay: 0.0,
                    round_energy: 0.0,
                    max_device_energy: 0.0,
                    cumulative_delay,
                    cumulative_energy,
                    devices_received: 0,
                    feasible: true,
                    degraded: decision.as_ref().map_or(0, |d| d.2),
                    status: RoundStatus::Diverged,
                });
                break;
            }

            let power: Vec<f64> = (0..n_dev).map(|u| strategy.map_or(fixed_power, |s| s.power[u])).collect();
            let outcomes: Vec<_> = (0..n_dev)
                .map(|u| {
                    let mut rng = stream(self.seed, u as u32, round as u32, Purpose::Channel);
                    self.profiles[u].channel.draw_transmission(power[u], &mut rng)
                })
                .collect();
            let received: Vec<bool> = outcomes.iter().map(|o| o.received).collect();
            let rates: Vec<f64> = outcomes.iter().map(|o| o.rate).collect();
            let pruning: Vec<f64> = uploads.iter().map(|up| up.pruning).collect();
            let nominal: Vec<f64> = uploads.iter().map(|up| up.nominal_bits).collect();
            let cost = round_cost_with_payload(&self.profiles, &pruning, &nominal, &power, &rates, &cfg.budgets)?;

            let update = match scheme {
                Scheme::SignSgd => sign_aggregate(&uploads, &received, cfg.baseline.sign_rule),
                _ => {
                    let contributions: Vec<Contribution<'_>> = (0..n_dev)
                        .map(|u| Contribution {
                            samples: sizes[u],
                            received: received[u],
                            gradient: &uploads[u].gradient,
                        })
                        .collect();
                    aggregate(&contributions)
                }
            };
            let update = match update {
                Ok(g) => Some(g),
                Err(Error::EmptyRound) => None,
                Err(e) => return Err(e),
            };
            observe(&RoundView {
                round,
                weights: &w,
                strategy,
                received: &received,
                update: update.as_deref(),
            });
            let mut status = RoundStatus::Ok;
            if let Some(g) = &update {
                match apply_update(&mut w, g, step) {
                    Ok(()) => {}
                    Err(Error::NumericalDivergence(msg)) => {
                        record.failure = Some(format!("diverged at round {round}: {msg}"));
                        status = RoundStatus::Diverged;
                    }
                    Err(e) => return Err(e),
                }
            }

            for (u, c) in cost.devices.iter().enumerate() {
                record.devices.push(DeviceRound {
                    round,
                    device: u,
                    pruning: pruning[u],
                    bits: strategy.map(|s| s.bits[u]),
                    power: power[u],
                    received: received[u],
                    delay: c.busy_time(),
                    energy: c.energy,
                });
            }
            let round_energy = cost.total_energy();
            cumulative_delay += cost.round_delay;
            cumulative_energy += round_energy;
            let (test_accuracy, train_loss) = match status {
                RoundStatus::Ok => (accuracy(model, &w, &self.test), global_loss(model, &w, &self.data)),
                RoundStatus::Diverged => (f64::NAN, f64::NAN),
            };
            let terms = decision.as_ref().map(|d| d.1);
            record.rounds.push(RoundMetrics {
                round,
                test_accuracy,
                train_loss,
                gamma: terms.map(|t| t.gamma),
                gamma_quantization: terms.map(|t| t.quantization),
                gamma_pruning: terms.map(|t| t.pruning),
                gamma_transmission: terms.map(|t| t.transmission),
                round_delay: cost.round_delay,
                round_energy,
                max_device_energy: cost.max_device_energy(),
                cumulative_delay,
                cumulative_energy,
                devices_received: received.iter().filter(|&&r| r).count(),
                feasible: cost.feasible,
                degraded: decision.as_ref().map_or(0, |d| d.2),
                status,
            });
            if status == RoundStatus::Diverged {
                break;
            }
        }
        Ok(record)
    }
}

/// Builds the scenario for `seed` and runs `scheme` on it.
pub fn run_scheme(config: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<RunRecord> {
    Setup::new(config, seed)?.run(scheme)
}
