//! Magnitude pruning.

use crate::error::{Error, Result};
use crate::fl::ModelVector;

/// Slack absorbed before flooring `ρ·V`, so that e.g. `0.3 · 10` prunes 3
/// parameters even though the product is 2.9999999999999996 in binary.
const COUNT_SLACK: f64 = 1e-9;

/// Number of parameters removed at ratio `ratio` out of `dim`.
pub fn pruned_count(dim: usize, ratio: f64) -> usize {
    ((ratio * dim as f64 + COUNT_SLACK).floor() as usize).min(dim)
}

/// Importance of every parameter, approximated by its magnitude.
pub fn importance_scores(weights: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| w.abs()).collect()
}

/// Survivors of a pruning pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    dim: usize,
    kept: Vec<u32>,
}

impl PruneMask {
    /// Keeps every coordinate.
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            kept: (0..dim as u32).collect(),
        }
    }

    /// Builds a mask from a sorted, duplicate-free index list.
    pub fn from_kept(dim: usize, kept: Vec<u32>) -> Result<Self> {
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedPacket("mask indices must be strictly increasing".into()));
        }
        if kept.last().is_some_and(|&i| i as usize >= dim) {
            return Err(Error::MalformedPacket(format!("mask index out of range for V = {dim}")));
        }
        Ok(Self { dim, kept })
    }

    /// Drops the `⌊ρV⌋` lowest scores. Ties go to the lower index first.
    pub fn from_scores(scores: &[f64], ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::invalid("pruning_ratio", format!("{ratio} not in [0, 1]")));
        }
        let dim = scores.len();
        let drop = pruned_count(dim, ratio);
        let mut order: Vec<u32> = (0..dim as u32).collect();
        order.sort_by(|&a, &b| scores[a as usize].total_cmp(&scores[b as usize]).then(a.cmp(&b)));
        let mut kept = order.split_off(drop);
        kept.sort_unstable();
        Ok(Self { dim, kept })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kept(&self) -> &[u32] {
        &self.kept
    }

    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }

    pub fn pruned_count(&self) -> usize {
        self.dim - self.kept.len()
    }

    /// Realised ratio `pruned / V`.
    pub fn ratio(&self) -> f64 {
        self.pruned_count() as f64 / self.dim as f64
    }

    /// Copies the kept coordinates of `dense` into `out`.
    pub fn gather_into(&self, dense: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.kept.iter().map(|&i| dense[i as usize]));
    }

    pub fn gather(&self, dense: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.kept.len());
        self.gather_into(dense, &mut out);
        out
    }

    /// Expands kept-coordinate values to a dense vector with zeros elsewhere.
    pub fn scatter(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                actual: values.len(),
            });
        }
        let mut dense = vec![0.0; self.dim];
        for (&i, v) in self.kept.iter().zip(values) {
            dense[i as usize] = *v;
        }
        Ok(dense)
    }
}

/// Zeroes the lowest-magnitude `⌊ρV⌋` weights.
pub fn prune(model: &ModelVector, ratio: f64) -> Result<(ModelVector, PruneMask)> {
    let mask = PruneMask::from_scores(&importance_scores(model.as_slice()), ratio)?;
    let pruned = ModelVector::new(mask.scatter(&mask.gather(model.as_slice()))?)?;
    Ok((pruned, mask))
}
