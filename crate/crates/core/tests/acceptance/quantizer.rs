//! Monte-Carlo checks of the stochastic quantizer.
//!
//! Draws are folded into per-coordinate level histograms, which give the
//! exact sample mean, variance and squared error of every coordinate without
//! storing the draws.

use std::sync::OnceLock;

use ltfl_core::compression::{quantize, quantize_into};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::Verdict;

const BITS: [u8; 4] = [1, 2, 4, 8];
const TRIALS: usize = 100;
const DIM: usize = 50;
const DRAWS: u32 = 100_000;
/// Two-sided tail mass beyond three standard errors.
const TAIL_3SE: f64 = 0.0027;

struct Trial {
    bits: u8,
    /// Coordinates whose Monte-Carlo mean lies beyond three standard errors.
    exceedances: usize,
    /// Coordinates with no spread in their draws whose mean is not exactly the input.
    inexact_constants: usize,
    mse: f64,
    bound: f64,
}

fn trials() -> &'static [Trial] {
    static CACHE: OnceLock<Vec<Trial>> = OnceLock::new();
    CACHE.get_or_init(run_trials)
}

fn run_trials() -> Vec<Trial> {
    let mut rng = SmallRng::seed_from_u64(0x5eed_0001);
    let mut out = Vec::with_capacity(BITS.len() * TRIALS);
    for &bits in &BITS {
        for _ in 0..TRIALS {
            let sigma = 10f64.powf(rng.random_range(-2.0..1.0));
            let g: Vec<f64> = (0..DIM)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sigma * z
                })
                .collect();
            out.push(run_trial(&g, bits, &mut rng));
        }
    }
    out
}

fn run_trial(g: &[f64], bits: u8, rng: &mut SmallRng) -> Trial {
    let width = 1usize << bits;
    let mut hist = vec![0u32; g.len() * width];
    let mut q = quantize(g, bits, rng).unwrap();
    for _ in 0..DRAWS {
        quantize_into(g, bits, rng, &mut q).unwrap();
        for (i, &l) in q.levels().iter().enumerate() {
            hist[i * width + usize::from(l)] += 1;
        }
    }

    let n = f64::from(DRAWS);
    let mut exceedances = 0;
    let mut inexact_constants = 0;
    let mut mse = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        let counts = &hist[i * width..(i + 1) * width];
        let value = |l: usize| q.sign(i) * q.grid_point(l as u16);
        let mut mean = 0.0;
        for (l, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            mean += f64::from(c) * value(l);
        }
        mean /= n;
        let mut ss = 0.0;
        for (l, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            ss += f64::from(c) * (value(l) - mean).powi(2);
            mse += f64::from(c) * (value(l) - gi).powi(2);
        }
        let se = (ss / (n - 1.0) / n).sqrt();
        let spread = counts.iter().filter(|&&c| c > 0).count() > 1;
        if spread {
            if (mean - gi).abs() > 3.0 * se {
                exceedances += 1;
            }
        } else if (mean - gi).abs() > 1e-12 * q.g_max() {
            inexact_constants += 1;
            exceedances += 1;
        }
    }
    let (g_min, g_max) = magnitude_range(g);
    let levels = (1u32 << bits) as f64 - 1.0;
    Trial {
        bits,
        exceedances,
        inexact_constants,
        mse: mse / n,
        bound: g.len() as f64 * (g_max - g_min).powi(2) / (4.0 * levels * levels),
    }
}

fn magnitude_range(g: &[f64]) -> (f64, f64) {
    g.iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())))
}

/// Every coordinate is checked against three standard errors of its own
/// Monte-Carlo mean. An unbiased quantizer still lands outside that band for
/// about 0.27% of coordinates, so the count of such coordinates is compared to
/// the upper three-sigma limit of a Binomial(M, 0.0027).
pub fn unbiasedness() -> Verdict {
    let trials = trials();
    let coords = (trials.len() * DIM) as f64;
    let exceed: usize = trials.iter().map(|t| t.exceedances).sum();
    let inexact: usize = trials.iter().map(|t| t.inexact_constants).sum();
    let expected = coords * TAIL_3SE;
    let allowed = expected + 3.0 * (expected * (1.0 - TAIL_3SE)).sqrt();
    let per_bits: Vec<String> = BITS
        .iter()
        .map(|&b| {
            let e: usize = trials.iter().filter(|t| t.bits == b).map(|t| t.exceedances).sum();
            format!("δ={b}: {e}")
        })
        .collect();
    Verdict::new(
        (exceed as f64) <= allowed,
        format!(
            "{exceed} of {coords} coordinates beyond 3 SE [{}], {inexact} of them with zero spread; \
             unbiased expectation {expected:.0}, allowed {allowed:.0}",
            per_bits.join(", ")
        ),
    )
}

pub fn variance_bound() -> Verdict {
    let trials = trials();
    let violations = trials.iter().filter(|t| !(t.mse <= t.bound)).count();
    let worst = trials
        .iter()
        .map(|t| t.mse / t.bound)
        .fold(0.0f64, f64::max);
    Verdict::new(
        violations == 0,
        format!("{violations} of {} trials above the bound; largest MSE / bound = {worst:.4}", trials.len()),
    )
}
