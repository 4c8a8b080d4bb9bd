//! Upper bound on the per-round optimality gap and its three error sources.
//!
//! For a strategy `(ρ, δ, p)` the gap is
//!
//! ```text
//! Γ = [ 3 Σᵤ Kᵤ (ḡᵤ − g̲ᵤ)² / (4 (2^δᵤ − 1)²)
//!     + 3 L² D² Σᵤ ρᵤ
//!     + (12 υ₁ / N) Σᵤ Nᵤ qᵤ(pᵤ) ] / (1 − 12 υ₂)
//! ```
//!
//! where `Kᵤ` is the number of kept coordinates and `[g̲ᵤ, ḡᵤ]` the magnitude
//! range of device `u`'s most recent packet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::{local_gradient, DeviceDataset, LossModel, ModelVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    /// Smoothness constant `L`.
    pub lipschitz: f64,
    /// Bound `D²` on the expected squared model norm.
    pub weight_bound_sq: f64,
    /// Additive gradient-variance constant `υ₁`.
    pub upsilon1: f64,
    /// Multiplicative gradient-variance constant `υ₂`, below 1/12.
    pub upsilon2: f64,
    /// Step size `η`; `None` means `1/L`.
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            lipschitz: 10.0,
            weight_bound_sq: 10.0,
            upsilon1: 1.0,
            upsilon2: 0.01,
            learning_rate: None,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.weight_bound_sq > 0.0 && self.upsilon1 >= 0.0) {
            return Err(Error::Config("bound constants need L > 0, D² > 0, υ₁ >= 0".into()));
        }
        if !(self.upsilon2 >= 0.0 && 12.0 * self.upsilon2 < 1.0) {
            return Err(Error::Config(format!(
                "υ₂ = {} makes the gap bound vacuous; it must lie in [0, 1/12)",
                self.upsilon2
            )));
        }
        if let Some(eta) = self.learning_rate {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("learning rate must be positive, got {eta}")));
            }
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        self.learning_rate.unwrap_or(1.0 / self.lipschitz)
    }

    fn scale(&self) -> f64 {
        1.0 / (1.0 - 12.0 * self.upsilon2)
    }
}

/// Magnitude range and kept-coordinate count of a device's gradient packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradRange {
    pub g_min: f64,
    pub g_max: f64,
    pub kept: usize,
}

impl GradRange {
    /// Range over the magnitudes of `values`.
    pub fn of(values: &[f64]) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        Self {
            g_min: if values.is_empty() { 0.0 } else { lo },
            g_max: hi,
            kept: values.len(),
        }
    }

    fn spread_sq(&self) -> f64 {
        (self.g_max - self.g_min).powi(2)
    }
}

/// The three error contributions, each already divided by `1 − 12υ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GapTerms {
    pub quantization: f64,
    pub pruning: f64,
    pub transmission: f64,
    pub gamma: f64,
}

/// Inputs of the gap that stay fixed while the controller searches.
#[derive(Debug, Clone, PartialEq)]
pub struct GapModel {
    pub constants: BoundConstants,
    pub ranges: Vec<GradRange>,
    pub samples: Vec<usize>,
}

impl GapModel {
    pub fn new(constants: BoundConstants, ranges: Vec<GradRange>, samples: Vec<usize>) -> Result<Self> {
        constants.validate()?;
        if ranges.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                actual: ranges.len(),
            });
        }
        if samples.iter().sum::<usize>() == 0 {
            return Err(Error::invalid("samples", "total sample count must be positive"));
        }
        if let Some(r) = ranges.iter().find(|r| !(r.g_min >= 0.0 && r.g_min <= r.g_max && r.g_max.is_finite())) {
            return Err(Error::invalid("grad_ranges", format!("bad range [{}, {}]", r.g_min, r.g_max)));
        }
        Ok(Self {
            constants,
            ranges,
            samples,
        })
    }

    pub fn devices(&self) -> usize {
        self.samples.len()
    }

    /// Quantization contribution of device `u` at `bits`, before the shared scale.
    pub fn quantization_raw(&self, u: usize, bits: u8) -> f64 {
        let levels = 2f64.powi(i32::from(bits)) - 1.0;
        3.0 * self.ranges[u].kept as f64 * self.ranges[u].spread_sq() / (4.0 * levels * levels)
    }

    /// Pruning contribution of a device at ratio `rho`, before the shared scale.
    pub fn pruning_raw(&self, rho: f64) -> f64 {
        let c = &self.constants;
        3.0 * c.lipschitz * c.lipschitz * c.weight_bound_sq * rho
    }

    /// Transmission contribution of device `u` at error rate `per`, before the shared scale.
    pub fn transmission_raw(&self, u: usize, per: f64) -> f64 {
        let total: usize = self.samples.iter().sum();
        12.0 * self.constants.upsilon1 * self.samples[u] as f64 * per / total as f64
    }

    /// Evaluates the gap for per-device ratios, bits and packet error rates.
    pub fn terms(&self, pruning: &[f64], bits: &[u8], pers: &[f64]) -> Result<GapTerms> {
        let n = self.devices();
        for len in [pruning.len(), bits.len(), pers.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        if let Some(b) = bits.iter().find(|&&b| b == 0) {
            return Err(Error::invalid("bits", format!("{b} < 1")));
        }
        let scale = self.constants.scale();
        let quantization = scale * (0..n).map(|u| self.quantization_raw(u, bits[u])).sum::<f64>();
        let pruning = scale * pruning.iter().map(|&r| self.pruning_raw(r)).sum::<f64>();
        let transmission = scale * (0..n).map(|u| self.transmission_raw(u, pers[u])).sum::<f64>();
        let gamma = quantization + pruning + transmission;
        if !gamma.is_finite() {
            return Err(Error::NumericalDivergence("gap bound is not finite".into()));
        }
        Ok(GapTerms {
            quantization,
            pruning,
            transmission,
            gamma,
        })
    }
}

/// Data-driven estimates of the bound constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimate {
    pub lipschitz: f64,
    pub weight_bound_sq: f64,
    pub upsilon1: f64,
    pub upsilon2: f64,
}

impl ConstantEstimate {
    /// Replaces the constants of `base`; the step size is left untouched.
    pub fn apply(&self, base: BoundConstants) -> BoundConstants {
        BoundConstants {
            lipschitz: self.lipschitz,
            weight_bound_sq: self.weight_bound_sq,
            upsilon1: self.upsilon1,
            upsilon2: self.upsilon2,
            ..base
        }
    }
}

/// Largest admissible `υ₂` returned by the estimator.
const UPSILON2_CAP: f64 = 0.08;

/// Estimates the bound constants around `probes`.
///
/// `L` is the largest ratio `‖∇F(w₁) − ∇F(w₂)‖ / ‖w₁ − w₂‖` over consecutive
/// probe pairs, `D²` the largest `‖w‖²`, and `(υ₁, υ₂)` a non-negative least
/// squares fit of `‖∇Fᵤ‖² ≈ υ₁ + υ₂ ‖∇F‖²` over all devices and probes.
pub fn estimate_constants(
    model: &dyn LossModel,
    probes: &[ModelVector],
    devices: &[DeviceDataset],
) -> Result<ConstantEstimate> {
    if probes.len() < 2 || devices.is_empty() {
        return Err(Error::invalid("probes", "need at least two probes and one device"));
    }
    let total: usize = devices.iter().map(DeviceDataset::len).sum();
    let mut globals = Vec::with_capacity(probes.len());
    let mut pairs = Vec::new();
    for w in probes {
        let locals = devices
            .iter()
            .map(|d| local_gradient(model, w, d))
            .collect::<Result<Vec<_>>>()?;
        let mut global = vec![0.0; model.dim()];
        for (d, g) in devices.iter().zip(&locals) {
            let weight = d.len() as f64 / total as f64;
            global.iter_mut().zip(g).for_each(|(a, b)| *a += weight * b);
        }
        let global_sq: f64 = global.iter().map(|g| g * g).sum();
        for g in &locals {
            pairs.push((global_sq, g.iter().map(|v| v * v).sum::<f64>()));
        }
        globals.push(global);
    }

    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut lipschitz = 0.0f64;
    for i in 1..probes.len() {
        let dw = dist(probes[i].as_slice(), probes[i - 1].as_slice());
        if dw > 0.0 {
            lipschitz = lipschitz.max(dist(&globals[i], &globals[i - 1]) / dw);
        }
    }
    if lipschitz <= 0.0 {
        return Err(Error::invalid("probes", "probes must not coincide"));
    }
    let weight_bound_sq = probes.iter().map(ModelVector::norm_sq).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    // Ordinary least squares for y = a + b·x, then clamp to the admissible set.
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let upsilon2 = slope.clamp(0.0, UPSILON2_CAP);
    let upsilon1 = pairs
        .iter()
        .map(|(x, y)| y - upsilon2 * x)
        .fold(0.0, f64::max);

    Ok(ConstantEstimate {
        lipschitz,
        weight_bound_sq,
        upsilon1,
        upsilon2,
    })
}
