//! Federated gradient descent: local gradients, aggregation and the global update.

pub mod checkpoint;
pub mod data;
pub mod loss;

pub use data::{load_delimited, Dataset, DeviceDataset, GaussianBlobs, Sample};
pub use loss::{LogisticRegression, LossModel, Mlp};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Global model parameters `w ∈ ℝ^V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("model", "dimension must be at least 1"));
        }
        Ok(Self(weights))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// Small Gaussian initialisation with standard deviation `scale`.
    pub fn random<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid("init_scale", e.to_string()))?;
        Self::new((0..dim).map(|_| normal.sample(rng)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

fn check_dims(model: &dyn LossModel, w: &ModelVector, n_features: usize) -> Result<()> {
    if w.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: w.dim(),
        });
    }
    if n_features != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: n_features,
        });
    }
    Ok(())
}

/// Full-batch local gradient `(1/Nᵤ) Σ ∇f(w; x, y)` over a device's data.
pub fn local_gradient(model: &dyn LossModel, w: &ModelVector, data: &DeviceDataset) -> Result<Vec<f64>> {
    check_dims(model, w, data.n_features())?;
    let mut grad = vec![0.0; model.dim()];
    let scale = 1.0 / data.len() as f64;
    for s in data.samples() {
        model.accumulate_gradient(w.as_slice(), &s.features, s.label, scale, &mut grad);
    }
    Ok(grad)
}

/// Mean loss over a sample set.
pub fn mean_loss(model: &dyn LossModel, w: &ModelVector, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples
        .iter()
        .map(|s| model.loss(w.as_slice(), &s.features, s.label))
        .sum::<f64>()
        / samples.len() as f64
}

/// Global loss `F(w) = Σ Nᵤ Fᵤ(w) / N`, the sample-weighted mean of local losses.
pub fn global_loss(model: &dyn LossModel, w: &ModelVector, devices: &[DeviceDataset]) -> f64 {
    let total: usize = devices.iter().map(DeviceDataset::len).sum();
    devices
        .iter()
        .map(|d| mean_loss(model, w, d.samples()) * d.len() as f64)
        .sum::<f64>()
        / total as f64
}

/// Fraction of correctly classified samples.
pub fn accuracy(model: &dyn LossModel, w: &ModelVector, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let hits = samples
        .iter()
        .filter(|s| model.predict(w.as_slice(), &s.features) == s.label)
        .count();
    hits as f64 / samples.len() as f64
}

/// One device's upload as seen by the server.
#[derive(Debug, Clone, Copy)]
pub struct Contribution<'a> {
    pub samples: usize,
    pub received: bool,
    /// Reconstructed (dense) gradient.
    pub gradient: &'a [f64],
}

/// Sample-weighted mean over successfully received uploads.
///
/// Returns [`Error::EmptyRound`] if nothing arrived.
pub fn aggregate(contributions: &[Contribution<'_>]) -> Result<Vec<f64>> {
    let received: Vec<_> = contributions.iter().filter(|c| c.received).collect();
    let Some(first) = received.first() else {
        return Err(Error::EmptyRound);
    };
    let dim = first.gradient.len();
    let mut out = vec![0.0; dim];
    let mut weight = 0.0;
    for c in &received {
        if c.gradient.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.gradient.len(),
            });
        }
        let n = c.samples as f64;
        weight += n;
        for (o, g) in out.iter_mut().zip(c.gradient) {
            *o += n * g;
        }
    }
    if weight <= 0.0 {
        return Err(Error::EmptyRound);
    }
    out.iter_mut().for_each(|o| *o /= weight);
    Ok(out)
}

/// `w ← w − η·g`. Fails if the result is not finite.
pub fn apply_update(w: &mut ModelVector, gradient: &[f64], step: f64) -> Result<()> {
    if gradient.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: gradient.len(),
        });
    }
    for (wi, g) in w.as_mut_slice().iter_mut().zip(gradient) {
        *wi -= step * g;
    }
    if !w.is_finite() {
        return Err(Error::NumericalDivergence("model weights became non-finite".into()));
    }
    Ok(())
}
