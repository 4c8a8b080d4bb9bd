//! Bayesian optimization of a black-box objective over a box.
//!
//! The surrogate is refitted after every evaluation. The next point maximizes
//! the probability of improving on the best observation by a margin `ς`,
//! found by scoring a shifted Halton design and refining the most promising
//! designs with a coordinate pattern search. Infeasible evaluations are
//! recorded at ten times the worst feasible value seen so far.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::gp::GpSurrogate;
use crate::error::{Error, Result};

/// Outcome of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Feasible(f64),
    Infeasible,
}

/// Which side of the incumbent the improvement target sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ImprovementTarget {
    /// Probability of landing below `best − ς`.
    #[default]
    BelowBest,
    /// Probability of landing below `best + ς`.
    AboveBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Total objective evaluations, including the initial design.
    pub max_evals: usize,
    /// Size of the quasi-random candidate design per iteration.
    pub candidates: usize,
    /// Number of top candidates refined by pattern search.
    pub refine_starts: usize,
    /// Margin `ς`; `None` uses 1% of the first observation's magnitude.
    pub margin: Option<f64>,
    pub target: ImprovementTarget,
    pub jitter: f64,
    /// Kernel length scale in the unit box; 1 is the plain unit kernel.
    pub length_scale: f64,
    /// Infeasible points score this multiple of the worst feasible value.
    pub penalty_factor: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            max_evals: 50,
            candidates: 256,
            refine_starts: 8,
            margin: None,
            target: ImprovementTarget::BelowBest,
            jitter: 1e-8,
            length_scale: 1.0,
            penalty_factor: 10.0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 2 {
            return Err(Error::invalid("max_evals", "need at least two evaluations"));
        }
        if self.candidates == 0 || self.refine_starts == 0 {
            return Err(Error::invalid("candidates", "candidate design and refinement must be non-empty"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::invalid("length_scale", format!("must be positive, got {}", self.length_scale)));
        }
        if !(self.jitter >= 0.0 && self.penalty_factor >= 1.0) {
            return Err(Error::invalid("jitter", "jitter must be >= 0 and penalty factor >= 1"));
        }
        if let Some(m) = self.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid("margin", format!("must be finite and >= 0, got {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoResult {
    /// Best feasible point in the original box, or the best penalized one if none was feasible.
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub feasible: bool,
    /// Values recorded for every evaluation, penalties included.
    pub history: Vec<f64>,
}

impl BoResult {
    /// Best value after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |best, v| {
                *best = best.min(*v);
                Some(*best)
            })
            .collect()
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability-of-improvement score in z-units: larger is better.
fn improvement_score(mean: f64, var: f64, threshold: f64, floor: f64) -> f64 {
    if var <= floor {
        return f64::NEG_INFINITY;
    }
    (threshold - mean) / var.sqrt()
}

/// Probability that the surrogate at `x` falls below `threshold`.
pub fn probability_of_improvement(gp: &GpSurrogate, x: &[f64], threshold: f64) -> f64 {
    let (mean, var) = gp.predict(x);
    if var <= 0.0 {
        return if mean < threshold { 1.0 } else { 0.0 };
    }
    normal_cdf((threshold - mean) / var.sqrt())
}

fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `n` points of a Halton design in `[0,1)^dim`, shifted by a random offset modulo one.
pub fn shifted_halton<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
    (1..=n as u64)
        .map(|i| {
            bases
                .iter()
                .zip(&shift)
                .map(|(&b, s)| (radical_inverse(i, b) + s).fract())
                .collect()
        })
        .collect()
}

struct Search<'a> {
    gp: &'a GpSurrogate,
    inv_length: f64,
    threshold: f64,
    var_floor: f64,
}

impl Search<'_> {
    fn score(&self, x: &[f64]) -> f64 {
        let scaled: Vec<f64> = x.iter().map(|v| v * self.inv_length).collect();
        let (mean, var) = self.gp.predict(&scaled);
        improvement_score(mean, var, self.threshold, self.var_floor)
    }

    /// Coordinate pattern search on the unit cube, maximizing the score.
    fn refine(&self, start: &[f64], start_score: f64) -> (Vec<f64>, f64) {
        let mut x = start.to_vec();
        let mut best = start_score;
        let mut step = 0.1;
        let mut budget = 60 * x.len().max(4);
        while step >= 1e-4 && budget > 0 {
            let mut moved = false;
            for d in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let old = x[d];
                    let new = (old + dir * step).clamp(0.0, 1.0);
                    if new == old {
                        continue;
                    }
                    x[d] = new;
                    let s = self.score(&x);
                    budget = budget.saturating_sub(1);
                    if s > best {
                        best = s;
                        moved = true;
                        break;
                    }
                    x[d] = old;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        (x, best)
    }
}

struct Observations<'a> {
    config: &'a BoConfig,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    feasible: Vec<bool>,
    worst_feasible: Option<f64>,
    margin: Option<f64>,
}

impl<'a> Observations<'a> {
    fn new(config: &'a BoConfig) -> Self {
        Self {
            config,
            points: Vec::with_capacity(config.max_evals),
            values: Vec::with_capacity(config.max_evals),
            feasible: Vec::with_capacity(config.max_evals),
            worst_feasible: None,
            margin: config.margin,
        }
    }

    fn record(&mut self, unit_point: Vec<f64>, eval: Evaluation) {
        let value = match eval {
            Evaluation::Feasible(v) => {
                self.worst_feasible = Some(self.worst_feasible.map_or(v, |w| w.max(v)));
                v
            }
            Evaluation::Infeasible => {
                let worst = self.worst_feasible.unwrap_or(1.0);
                self.config.penalty_factor * worst.abs().max(f64::MIN_POSITIVE)
            }
        };
        if self.margin.is_none() {
            self.margin = Some(0.01 * value.abs());
        }
        self.points.push(unit_point);
        self.values.push(value);
        self.feasible.push(matches!(eval, Evaluation::Feasible(_)));
    }
}

fn checked(eval: Evaluation) -> Result<Evaluation> {
    match eval {
        Evaluation::Feasible(v) if !v.is_finite() => {
            Err(Error::NumericalDivergence("objective returned a non-finite value".into()))
        }
        e => Ok(e),
    }
}

/// Minimizes `objective` over the box `lower[i] ≤ x[i] ≤ upper[i]`.
///
/// `initial` points (in the original box) are evaluated first; if there are
/// fewer than two, uniformly random points fill the design up to two.
pub fn minimize<F, R>(
    mut objective: F,
    lower: &[f64],
    upper: &[f64],
    initial: &[Vec<f64>],
    config: &BoConfig,
    rng: &mut R,
) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
    R: Rng + ?Sized,
{
    config.validate()?;
    let dim = lower.len();
    if dim == 0 {
        return Err(Error::invalid("dim", "need at least one dimension"));
    }
    if upper.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: upper.len() });
    }
    if let Some((lo, hi)) = lower.iter().zip(upper).find(|(lo, hi)| !(lo < hi)) {
        return Err(Error::invalid("box", format!("need lower < upper, got [{lo}, {hi}]")));
    }
    let to_box = |u: &[f64]| {
        u.iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect::<Vec<_>>()
    };

    if let Some(bad) = initial.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
    }
    let mut design: Vec<Vec<f64>> = initial
        .iter()
        .take(config.max_evals)
        .map(|p| {
            p.iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    while design.len() < 2 {
        design.push((0..dim).map(|_| rng.random()).collect());
    }

    let mut obs = Observations::new(config);
    for u in design {
        let eval = checked(objective(&to_box(&u))?)?;
        obs.record(u, eval);
        if obs.points.len() == config.max_evals {
            break;
        }
    }

    while obs.points.len() < config.max_evals {
        let inv_length = 1.0 / config.length_scale;
        let scaled: Vec<Vec<f64>> = obs
            .points
            .iter()
            .map(|p| p.iter().map(|v| v * inv_length).collect())
            .collect();
        let gp = GpSurrogate::fit(&scaled, &obs.values, config.jitter)?;
        let best = obs.values.iter().copied().fold(f64::INFINITY, f64::min);
        let m = obs.margin.unwrap_or(0.0);
        let threshold = match config.target {
            ImprovementTarget::BelowBest => best - m,
            ImprovementTarget::AboveBest => best + m,
        };
        let spread = obs.values.iter().map(|v| (v - best).abs()).fold(0.0, f64::max).max(1.0);
        let search = Search {
            gp: &gp,
            inv_length,
            threshold,
            // Variance at the jitter level only marks points already sampled.
            var_floor: (1e-10 * spread * spread).max(gp.noise_variance()),
        };

        let mut scored: Vec<(f64, Vec<f64>)> = shifted_halton(config.candidates, dim, rng)
            .into_iter()
            .map(|c| (search.score(&c), c))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut choice: Option<(f64, Vec<f64>)> = None;
        for (s, c) in scored.into_iter().take(config.refine_starts) {
            let (x, sx) = if s.is_finite() { search.refine(&c, s) } else { (c, s) };
            if choice.as_ref().is_none_or(|(b, _)| sx > *b) {
                choice = Some((sx, x));
            }
        }
        let (_, mut next) = choice.expect("candidate design is non-empty");
        if obs.points.iter().any(|p| p == &next) {
            next = (0..dim).map(|_| rng.random()).collect();
        }
        let eval = checked(objective(&to_box(&next))?)?;
        obs.record(next, eval);
    }

    let Observations {
        points,
        values,
        feasible: feasible_mask,
        ..
    } = obs;
    let pick = |only_feasible: bool| {
        (0..values.len())
            .filter(|&i| !only_feasible || feasible_mask[i])
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
    };
    let (idx, feasible) = match pick(true) {
        Some(i) => (i, true),
        None => (pick(false).expect("at least two evaluations"), false),
    };
    Ok(BoResult {
        best_point: to_box(&points[idx]),
        best_value: values[idx],
        feasible,
        history: values,
    })
}
