//! Uplink channel: achievable rate, packet error rate and per-round delivery.
//!
//! The channel gain is `h = ϖ · d⁻²`. In [`FadingMode::Deterministic`] the
//! fading coefficient is used as-is and the expectations over `h` collapse to
//! a single evaluation. In [`FadingMode::RayleighMeanScaled`] the gain is
//! `ϖ · X · d⁻²` with `X ~ Exp(1)` and expectations are Monte-Carlo means.
//!
//! Monte-Carlo expectations use common random numbers: every call draws the
//! same `mc_samples` fading realisations from `mc_seed`, so [`ChannelParams::uplink_rate`]
//! and [`ChannelParams::packet_error_rate`] are deterministic, smooth and
//! monotone in the transmit power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power ratio in decibels to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm (or dBm/Hz) to W (or W/Hz).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// `h = ϖ d⁻²` with the configured coefficient.
    #[default]
    Deterministic,
    /// `h = ϖ X d⁻²` with `X` exponential of mean one.
    RayleighMeanScaled,
}

/// Uplink parameters of one device. All quantities are linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Allocated uplink bandwidth, Hz.
    pub bandwidth_ul: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    /// Waterfall threshold (linear).
    pub waterfall_threshold: f64,
    /// Interference power, W.
    pub interference: f64,
    /// Fading coefficient ϖ.
    pub fading_coeff: f64,
    /// Device to access-point distance, m.
    pub distance: f64,
    pub fading_mode: FadingMode,
    /// Sample count for Monte-Carlo expectations; ignored when deterministic.
    pub mc_samples: usize,
    /// Seed of the common fading realisations used by the expectations.
    pub mc_seed: u64,
}

/// Result of one packet transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionOutcome {
    /// Whether the packet passed the CRC at the server.
    pub received: bool,
    /// Expected uplink rate, bit/s.
    pub rate: f64,
    /// Packet error probability.
    pub per: f64,
}

impl TransmissionOutcome {
    pub fn alpha(&self) -> u8 {
        u8::from(self.received)
    }
}

impl ChannelParams {
    /// Deterministic-fading parameters.
    pub fn deterministic(
        bandwidth_ul: f64,
        noise_psd: f64,
        waterfall_threshold: f64,
        interference: f64,
        fading_coeff: f64,
        distance: f64,
    ) -> Result<Self> {
        let params = Self {
            bandwidth_ul,
            noise_psd,
            waterfall_threshold,
            interference,
            fading_coeff,
            distance,
            fading_mode: FadingMode::Deterministic,
            mc_samples: 1,
            mc_seed: 0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Switches to Rayleigh fading with `mc_samples` common realisations.
    pub fn with_rayleigh(mut self, mc_samples: usize, mc_seed: u64) -> Result<Self> {
        self.fading_mode = FadingMode::RayleighMeanScaled;
        self.mc_samples = mc_samples;
        self.mc_seed = mc_seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        }
        positive("bandwidth_ul", self.bandwidth_ul)?;
        positive("noise_psd", self.noise_psd)?;
        positive("waterfall_threshold", self.waterfall_threshold)?;
        positive("fading_coeff", self.fading_coeff)?;
        positive("distance", self.distance)?;
        if !(self.interference.is_finite() && self.interference >= 0.0) {
            return Err(Error::invalid(
                "interference",
                format!("must be finite and >= 0, got {}", self.interference),
            ));
        }
        if self.mc_samples == 0 {
            return Err(Error::invalid("mc_samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Large-scale gain `ϖ d⁻²`.
    pub fn mean_gain(&self) -> f64 {
        self.fading_coeff / (self.distance * self.distance)
    }

    /// Interference plus noise power, W.
    pub fn noise_floor(&self) -> f64 {
        self.interference + self.bandwidth_ul * self.noise_psd
    }

    /// One realisation of the channel gain.
    pub fn channel_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.fading_mode {
            FadingMode::Deterministic => self.mean_gain(),
            FadingMode::RayleighMeanScaled => {
                let x: f64 = Exp1.sample(rng);
                self.mean_gain() * x
            }
        }
    }

    /// `E_h[f(h)]` over the configured fading model, using `rng` for the
    /// Monte-Carlo draws.
    pub fn expect_with<R, F>(&self, rng: &mut R, samples: usize, f: F) -> f64
    where
        R: Rng + ?Sized,
        F: Fn(f64) -> f64,
    {
        match self.fading_mode {
            FadingMode::Deterministic => f(self.mean_gain()),
            FadingMode::RayleighMeanScaled => {
                let mut acc = 0.0;
                for _ in 0..samples {
                    acc += f(self.channel_gain(rng));
                }
                acc / samples as f64
            }
        }
    }

    fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.mc_seed);
        self.expect_with(&mut rng, self.mc_samples, f)
    }

    /// Instantaneous rate for gain `h`, bit/s.
    pub fn rate_at_gain(&self, power: f64, gain: f64) -> f64 {
        self.bandwidth_ul * (power * gain / self.noise_floor()).ln_1p() / std::f64::consts::LN_2
    }

    /// Instantaneous packet error probability for gain `h`.
    pub fn per_at_gain(&self, power: f64, gain: f64) -> f64 {
        if gain <= 0.0 || power <= 0.0 {
            return 1.0;
        }
        -(-self.waterfall_threshold * self.noise_floor() / (power * gain)).exp_m1()
    }

    /// Expected uplink rate `B · E_h[log₂(1 + p h / (I + B N₀))]`, bit/s.
    pub fn uplink_rate(&self, power: f64) -> f64 {
        self.expect(|h| self.rate_at_gain(power, h))
    }

    /// Expected packet error rate `E_h[1 − exp(−Υ (I + B N₀) / (p h))]`.
    pub fn packet_error_rate(&self, power: f64) -> f64 {
        self.expect(|h| self.per_at_gain(power, h))
    }

    /// Draws the delivery indicator: received with probability `1 − q`.
    pub fn draw_transmission<R: Rng + ?Sized>(&self, power: f64, rng: &mut R) -> TransmissionOutcome {
        let per = self.packet_error_rate(power);
        let rate = self.uplink_rate(power);
        let u: f64 = rng.random();
        TransmissionOutcome {
            received: u < 1.0 - per,
            rate,
            per,
        }
    }
}
