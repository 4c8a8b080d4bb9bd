//! Zero-mean Gaussian-process surrogate with a unit squared-exponential kernel.
//!
//! Inputs are expected in the unit cube. Outputs are standardized before the
//! fit and predictions are mapped back, so the prior scale follows the data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// `exp(−‖x − y‖² / 2)`.
pub fn kernel(x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    (-0.5 * d2).exp()
}

/// Largest jitter tried before giving up on a factorization.
const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `K⁻¹ y` on standardized outputs.
    weights: DVector<f64>,
    offset: f64,
    scale: f64,
    jitter: f64,
}

impl GpSurrogate {
    /// Fits the posterior. The jitter grows tenfold until `K + jitter·I` factorizes.
    pub fn fit(points: &[Vec<f64>], values: &[f64], jitter: f64) -> Result<Self> {
        let m = points.len();
        if m == 0 || values.len() != m {
            return Err(Error::invalid("observations", format!("{m} points, {} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence("non-finite observation".into()));
        }
        let offset = values.iter().sum::<f64>() / m as f64;
        let spread = (values.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / m as f64).sqrt();
        let scale = if spread > 0.0 { spread } else { 1.0 };
        let y = DVector::from_iterator(m, values.iter().map(|v| (v - offset) / scale));
        let gram = DMatrix::from_fn(m, m, |i, j| kernel(&points[i], &points[j]));

        let mut jitter = jitter.max(1e-12);
        loop {
            let mut k = gram.clone();
            for i in 0..m {
                k[(i, i)] += jitter;
            }
            if let Some(chol) = k.cholesky() {
                let weights = chol.solve(&y);
                return Ok(Self {
                    points: points.to_vec(),
                    values: values.to_vec(),
                    chol,
                    weights,
                    offset,
                    scale,
                    jitter,
                });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER {
                return Err(Error::NumericalDivergence("kernel matrix could not be factorized".into()));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Diagonal regularizer actually used.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Variance the jitter adds, in the units of the observations. Posterior
    /// variance at a sampled point is of this order.
    pub fn noise_variance(&self) -> f64 {
        self.jitter * self.scale * self.scale
    }

    /// Posterior mean and variance at `x`, in the units of the observations.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let kx = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| kernel(p, x)));
        let mean = kx.dot(&self.weights);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("Cholesky factor has a positive diagonal");
        let var = (1.0 - v.norm_squared()).max(0.0);
        (self.offset + self.scale * mean, self.scale * self.scale * var)
    }
}
