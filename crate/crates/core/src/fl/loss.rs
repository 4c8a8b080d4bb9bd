//! Per-sample losses with analytic gradients.

use crate::error::{Error, Result};

/// A per-sample classification loss `f(w; x, y)` over a flat parameter vector.
pub trait LossModel: Send + Sync {
    /// Number of parameters `V`.
    fn dim(&self) -> usize;

    /// Expected feature dimension.
    fn n_features(&self) -> usize;

    fn loss(&self, w: &[f64], x: &[f64], y: usize) -> f64;

    /// Adds `scale · ∇f(w; x, y)` into `grad`.
    fn accumulate_gradient(&self, w: &[f64], x: &[f64], y: usize, scale: f64, grad: &mut [f64]);

    fn predict(&self, w: &[f64], x: &[f64]) -> usize;

    fn gradient(&self, w: &[f64], x: &[f64], y: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.accumulate_gradient(w, x, y, 1.0, &mut g);
        g
    }
}

fn log_softmax_inplace(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in z.iter_mut() {
        *v -= lse;
    }
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

/// Multinomial logistic regression with softmax cross-entropy.
///
/// Layout: class-major rows of `n_features` weights followed by one bias,
/// `V = n_classes · (n_features + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogisticRegression {
    pub n_features: usize,
    pub n_classes: usize,
}

impl LogisticRegression {
    pub fn new(n_features: usize, n_classes: usize) -> Result<Self> {
        if n_features == 0 || n_classes < 2 {
            return Err(Error::invalid(
                "logistic",
                format!("need n_features >= 1 and n_classes >= 2, got {n_features}/{n_classes}"),
            ));
        }
        Ok(Self { n_features, n_classes })
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.n_features + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * stride..(c + 1) * stride];
            *o = row[self.n_features] + row[..self.n_features].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

impl LossModel for LogisticRegression {
    fn dim(&self) -> usize {
        self.n_classes * (self.n_features + 1)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn loss(&self, w: &[f64], x: &[f64], y: usize) -> f64 {
        let mut z = vec![0.0; self.n_classes];
        self.logits(w, x, &mut z);
        log_softmax_inplace(&mut z);
        -z[y]
    }

    fn accumulate_gradient(&self, w: &[f64], x: &[f64], y: usize, scale: f64, grad: &mut [f64]) {
        let mut z = vec![0.0; self.n_classes];
        self.logits(w, x, &mut z);
        log_softmax_inplace(&mut z);
        let stride = self.n_features + 1;
        for (c, lz) in z.iter().enumerate() {
            let delta = scale * (lz.exp() - if c == y { 1.0 } else { 0.0 });
            let row = &mut grad[c * stride..(c + 1) * stride];
            for (g, xi) in row[..self.n_features].iter_mut().zip(x) {
                *g += delta * xi;
            }
            row[self.n_features] += delta;
        }
    }

    fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut z = vec![0.0; self.n_classes];
        self.logits(w, x, &mut z);
        argmax(&z)
    }
}

/// Two-layer perceptron: `tanh` hidden layer, softmax output.
///
/// Layout: `W1 (hidden × n_features)`, `b1 (hidden)`, `W2 (n_classes × hidden)`, `b2 (n_classes)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub n_features: usize,
    pub hidden: usize,
    pub n_classes: usize,
}

impl Mlp {
    pub fn new(n_features: usize, hidden: usize, n_classes: usize) -> Result<Self> {
        if n_features == 0 || hidden == 0 || n_classes < 2 {
            return Err(Error::invalid(
                "mlp",
                format!("bad shape {n_features}x{hidden}x{n_classes}"),
            ));
        }
        Ok(Self {
            n_features,
            hidden,
            n_classes,
        })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.n_features;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.n_classes * self.hidden;
        (b1, w2, b2)
    }

    fn forward(&self, w: &[f64], x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w[j * self.n_features..(j + 1) * self.n_features];
            let pre = w[b1 + j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *h = pre.tanh();
        }
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
            *o = w[b2 + c] + row.iter().zip(hidden.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

impl LossModel for Mlp {
    fn dim(&self) -> usize {
        self.offsets().2 + self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn loss(&self, w: &[f64], x: &[f64], y: usize) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.n_classes];
        self.forward(w, x, &mut h, &mut z);
        log_softmax_inplace(&mut z);
        -z[y]
    }

    fn accumulate_gradient(&self, w: &[f64], x: &[f64], y: usize, scale: f64, grad: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.n_classes];
        self.forward(w, x, &mut h, &mut z);
        log_softmax_inplace(&mut z);

        let mut dh = vec![0.0; self.hidden];
        for c in 0..self.n_classes {
            let dz = scale * (z[c].exp() - if c == y { 1.0 } else { 0.0 });
            grad[b2 + c] += dz;
            let row = w2 + c * self.hidden;
            for j in 0..self.hidden {
                grad[row + j] += dz * h[j];
                dh[j] += dz * w[row + j];
            }
        }
        for j in 0..self.hidden {
            // d tanh = 1 - tanh²
            let da = dh[j] * (1.0 - h[j] * h[j]);
            grad[b1 + j] += da;
            let row = &mut grad[j * self.n_features..(j + 1) * self.n_features];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += da * xi;
            }
        }
    }

    fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.n_classes];
        self.forward(w, x, &mut h, &mut z);
        argmax(&z)
    }
}
