//! Analytic loss gradients against central finite differences.

use ltfl_core::{LogisticRegression, LossModel, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const PROBES: usize = 20;
const TOLERANCE: f64 = 1e-4;

fn central_difference(model: &dyn LossModel, w: &[f64], x: &[f64], y: usize) -> Vec<f64> {
    let mut probe = w.to_vec();
    (0..w.len())
        .map(|i| {
            let h = 1e-5 * w[i].abs().max(1.0);
            probe[i] = w[i] + h;
            let up = model.loss(&probe, x, y);
            probe[i] = w[i] - h;
            let down = model.loss(&probe, x, y);
            probe[i] = w[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|a| a * a).sum::<f64>().sqrt()
}

/// Largest relative error `‖analytic − numeric‖ / ‖numeric‖` over the probes.
fn worst_error(model: &dyn LossModel, classes: usize, rng: &mut ChaCha8Rng) -> f64 {
    (0..PROBES)
        .map(|_| {
            let w: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..model.n_features()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(0..classes);
            let analytic = model.gradient(&w, &x, y);
            let numeric = central_difference(model, &w, &x, y);
            norm(analytic.iter().zip(&numeric).map(|(a, n)| a - n)) / norm(numeric.iter().copied())
        })
        .fold(0.0, f64::max)
}

pub fn finite_differences() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
    let logistic = LogisticRegression::new(20, 10).unwrap();
    let mlp = Mlp::new(20, 16, 10).unwrap();
    let e_log = worst_error(&logistic, 10, &mut rng);
    let e_mlp = worst_error(&mlp, 10, &mut rng);
    Verdict::new(
        e_log <= TOLERANCE && e_mlp <= TOLERANCE,
        format!("worst relative error over {PROBES} probes: logistic {e_log:.2e}, mlp {e_mlp:.2e}"),
    )
}
