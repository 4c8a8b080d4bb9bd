//! Pruning error bound and the closed-form ratio / bit-width decisions.

use ltfl_core::compression::prune;
use ltfl_core::controller::{optimal_bits, optimal_pruning, DeviceContext};
use ltfl_core::{Error, ModelVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::instances::{self as inst, budgets, linspace};
use crate::Verdict;

fn weights(rng: &mut ChaCha8Rng, kind: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            match kind {
                0 => z,
                1 => rng.random_range(-1.0..1.0),
                // Ratio of normals: heavy tails.
                2 => {
                    let w: f64 = StandardNormal.sample(rng);
                    z / w
                }
                // Many exact ties, zeros included.
                _ => f64::from(rng.random_range(-3i32..=3)),
            }
        })
        .collect()
}

/// Floating-point slack on the bound: both sides are sums of up to a few
/// thousand squares.
const SUM_SLACK: f64 = 1e-12;

pub fn pruning_bound() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let pairs = 1000;
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for trial in 0..pairs {
        let dim = rng.random_range(1..=2000);
        let w = weights(&mut rng, trial % 4, dim);
        let ratio = if trial % 5 == 0 {
            f64::from(rng.random_range(0..dim as u32)) / dim as f64
        } else {
            rng.random_range(0.0..1.0)
        };
        let (pruned, _) = prune(&ModelVector::new(w.clone()).unwrap(), ratio).unwrap();
        let err: f64 = w.iter().zip(pruned.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
        let norm: f64 = w.iter().map(|a| a * a).sum();
        let bound = ratio * norm;
        if err > bound * (1.0 + SUM_SLACK) {
            violations += 1;
        }
        if bound > 0.0 {
            tightest = tightest.max(err / bound);
        }
    }
    Verdict::new(
        violations == 0,
        format!("{violations} of {pairs} pairs violate; largest error / bound = {tightest:.4}"),
    )
}

const INSTANCES: usize = 50;
const GRID: usize = 10_000;

pub fn pruning_vs_grid() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let bounds = inst::control_box();
    let step = bounds.max_pruning / (GRID - 1) as f64;
    let mut matches = 0;
    let (mut zero, mut interior, mut infeasible) = (0, 0, 0);
    let mut worst_steps = 0.0f64;
    for _ in 0..INSTANCES {
        let d = inst::device(&mut rng);
        let dim = rng.random_range(100..=5000);
        let bits = rng.random_range(1..=bounds.max_bits);
        let power = rng.random_range(bounds.min_power..=bounds.max_power);
        let rate = inst::rate(&d, power);
        let payload = inst::payload(dim, f64::from(bits));
        let full_delay = inst::train_time(&d) + payload / rate;
        let full_energy = inst::train_energy(&d) + power * payload / rate;
        // Scale the budgets so the binding one needs a ratio near `target`.
        let target = rng.random_range(-0.2..0.6);
        let (delay_slack, energy_slack) = match rng.random_range(0..3) {
            0 => (1.0, rng.random_range(1.0..1.5)),
            1 => (rng.random_range(1.0..1.5), 1.0),
            _ => (1.0, 1.0),
        };
        let b = budgets(
            inst::SERVER_DELAY + full_delay * (1.0 - target) * delay_slack,
            full_energy * (1.0 - target) * energy_slack,
        );
        let gap = inst::gap_model(&mut rng, std::slice::from_ref(&d), dim);

        let per = inst::error_rate(&d, power);
        let oracle = linspace(0.0, bounds.max_pruning, GRID)
            .into_iter()
            .filter(|&rho| inst::feasible(&d, &b, dim, rho, bits, power))
            .map(|rho| (rho, inst::gap_share(&gap, 0, rho, bits, per)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(rho, _)| rho);

        let ctx = DeviceContext {
            index: 0,
            device: &d,
            budgets: &b,
            model_dim: dim,
            overhead_bits: inst::OVERHEAD_BITS,
        };
        let closed = optimal_pruning(&ctx, bits, power, d.channel.uplink_rate(power), bounds.max_pruning);
        let ok = match (oracle, closed) {
            (None, Err(Error::Infeasible { .. })) => {
                infeasible += 1;
                true
            }
            (Some(g), Ok(c)) => {
                if c == 0.0 {
                    zero += 1;
                } else {
                    interior += 1;
                }
                let steps = (g - c).abs() / step;
                worst_steps = worst_steps.max(steps);
                steps <= 1.0
            }
            _ => false,
        };
        if ok {
            matches += 1;
        }
    }
    Verdict::new(
        matches == INSTANCES,
        format!(
            "{matches} of {INSTANCES} match ({interior} interior, {zero} at zero, {infeasible} infeasible); \
             largest gap {worst_steps:.3} grid steps"
        ),
    )
}

pub fn bits_vs_enumeration() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let bounds = inst::control_box();
    let mut matches = 0;
    let mut infeasible = 0;
    let mut chosen = [0usize; 9];
    for _ in 0..INSTANCES {
        let d = inst::device(&mut rng);
        let dim = rng.random_range(100..=5000);
        let rho = rng.random_range(0.0..bounds.max_pruning);
        let power = rng.random_range(bounds.min_power..=bounds.max_power);
        let rate = inst::rate(&d, power);
        let kept = 1.0 - rho;
        // Budgets that bind at a fractional bit width; the other one is looser.
        let binding = rng.random_range(0.5..9.0);
        let loose = binding + rng.random_range(0.0..4.0);
        let (delay_bits, energy_bits) = if rng.random_bool(0.5) {
            (binding, loose)
        } else {
            (loose, binding)
        };
        let b = budgets(
            inst::SERVER_DELAY + kept * (inst::train_time(&d) + inst::payload(dim, delay_bits) / rate),
            kept * (inst::train_energy(&d) + power * inst::payload(dim, energy_bits) / rate),
        );
        let gap = inst::gap_model(&mut rng, std::slice::from_ref(&d), dim);
        let per = inst::error_rate(&d, power);
        let oracle = (1..=bounds.max_bits)
            .filter(|&bits| inst::feasible(&d, &b, dim, rho, bits, power))
            .map(|bits| (bits, inst::gap_share(&gap, 0, rho, bits, per)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(bits, _)| bits);

        let ctx = DeviceContext {
            index: 0,
            device: &d,
            budgets: &b,
            model_dim: dim,
            overhead_bits: inst::OVERHEAD_BITS,
        };
        let closed = optimal_bits(&ctx, rho, power, d.channel.uplink_rate(power), bounds.max_bits);
        let ok = match (oracle, closed) {
            (None, Err(Error::Infeasible { .. })) => {
                infeasible += 1;
                true
            }
            (Some(o), Ok(c)) => {
                chosen[usize::from(c)] += 1;
                o == c
            }
            _ => false,
        };
        if ok {
            matches += 1;
        }
    }
    let spread: Vec<String> = (1..=8).map(|b| format!("{b}:{}", chosen[b])).collect();
    Verdict::new(
        matches == INSTANCES,
        format!(
            "{matches} of {INSTANCES} match exactly ({infeasible} infeasible); chosen widths {}",
            spread.join(" ")
        ),
    )
}

pub fn gap_monotone_in_bits() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let bounds = inst::control_box();
    let instances = 20;
    let mut checks = 0;
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=6);
        let devices: Vec<_> = (0..n).map(|_| inst::device(&mut rng)).collect();
        let dim = rng.random_range(100..=5000);
        let gap = inst::gap_model(&mut rng, &devices, dim);
        let pruning: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..bounds.max_pruning)).collect();
        let mut bits: Vec<u8> = (0..n).map(|_| rng.random_range(1..=bounds.max_bits)).collect();
        let pers: Vec<f64> = devices
            .iter()
            .map(|d| inst::error_rate(d, rng.random_range(bounds.min_power..=bounds.max_power)))
            .collect();
        for u in 0..n {
            let keep = bits[u];
            let mut previous = f64::INFINITY;
            for b in 1..=bounds.max_bits {
                bits[u] = b;
                let gamma = gap.terms(&pruning, &bits, &pers).unwrap().gamma;
                if b > 1 {
                    checks += 1;
                    if !(gamma < previous) {
                        failures += 1;
                    }
                }
                previous = gamma;
            }
            bits[u] = keep;
        }
    }
    Verdict::new(
        failures == 0,
        format!("{failures} of {checks} single-device increments fail to lower the gap strictly"),
    )
}
