//! Power search and the alternating controller against brute-force oracles.

use ltfl_core::controller::{search_power, BoConfig};
use ltfl_core::{two_stage_control, Budgets, ControlStrategy, ControllerConfig, DeviceProfile, GapModel, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instances::{self as inst, budgets, linspace, median};
use crate::Verdict;

const SEEDS: u64 = 20;
const GRID: usize = 50;
const MAX_EVALS: usize = 50;
const RELATIVE: f64 = 0.05;

/// Devices whose energy budget binds exactly at a chosen power cap with no
/// pruning, so the best feasible power of each device is `min(cap, p_max)`.
struct PowerInstance {
    devices: Vec<DeviceProfile>,
    budgets: Budgets,
    gap: GapModel,
    dim: usize,
    bits: Vec<u8>,
}

fn power_instance(rng: &mut ChaCha8Rng, n: usize) -> PowerInstance {
    let bounds = inst::control_box();
    let dim = rng.random_range(1000..=5000);
    let max_energy = rng.random_range(3.0..15.0);
    let mut devices = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    while devices.len() < n {
        let mut d = inst::device(rng);
        let b = rng.random_range(4..=bounds.max_bits);
        let cap = rng.random_range(1.05 * bounds.min_power..1.2 * bounds.max_power);
        let upload = cap * inst::payload(dim, f64::from(b)) / inst::rate(&d, cap);
        // Pick the CPU frequency that makes training plus upload at `cap` use the whole budget.
        let cycles = d.n_samples as f64 * d.cycles_per_sample;
        let freq = ((max_energy - upload) / (d.energy_coeff * cycles)).sqrt();
        if !(3e7..=1.1e8).contains(&freq) {
            continue;
        }
        d.cpu_freq = freq;
        devices.push(d);
        bits.push(b);
    }
    let gap = inst::gap_model(rng, &devices, dim);
    PowerInstance {
        devices,
        budgets: budgets(1e6, max_energy),
        gap,
        dim,
        bits,
    }
}

/// Best gap over the full `GRID^n` power lattice.
fn grid_optimum(p: &PowerInstance) -> f64 {
    let bounds = inst::control_box();
    let axis = linspace(bounds.min_power, bounds.max_power, GRID);
    let n = p.devices.len();
    let pruning = vec![0.0; n];
    let mut index = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let power: Vec<f64> = index.iter().map(|&i| axis[i]).collect();
        let ok = (0..n).all(|u| inst::feasible(&p.devices[u], &p.budgets, p.dim, 0.0, p.bits[u], power[u]));
        if ok {
            best = best.min(inst::gap(&p.gap, &p.devices, &pruning, &p.bits, &power));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            index[k] += 1;
            if index[k] < GRID {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}

pub fn power_vs_grid() -> Verdict {
    let bounds = inst::control_box();
    let config = BoConfig {
        max_evals: MAX_EVALS,
        ..BoConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let mut gaps = Vec::with_capacity(SEEDS as usize);
        let mut infeasible = 0;
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0700 + 16 * n as u64 + seed);
            let p = power_instance(&mut rng, n);
            let problem = Problem {
                devices: &p.devices,
                budgets: &p.budgets,
                bounds: &bounds,
                gap: &p.gap,
                model_dim: p.dim,
                overhead_bits: inst::OVERHEAD_BITS,
            };
            let fixed = ControlStrategy {
                pruning: vec![0.0; n],
                bits: p.bits.clone(),
                power: vec![bounds.min_power; n],
            };
            let active: Vec<usize> = (0..n).collect();
            let power = search_power(&problem, &fixed, &active, &config, &mut rng).unwrap();
            if !(0..n).all(|u| inst::feasible(&p.devices[u], &p.budgets, p.dim, 0.0, p.bits[u], power[u])) {
                infeasible += 1;
            }
            let found = inst::gap(&p.gap, &p.devices, &fixed.pruning, &p.bits, &power);
            let grid = grid_optimum(&p);
            gaps.push((found - grid) / grid);
        }
        let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let med = median(&mut gaps);
        pass &= med <= RELATIVE && infeasible == 0;
        parts.push(format!("U={n}: median {med:+.2e}, worst {worst:+.2e}, {infeasible} infeasible"));
    }
    Verdict::new(pass, format!("relative gap to grid; {}", parts.join("; ")))
}

/// Devices from the default ranges with budgets that force pruning on the slower devices.
fn controller_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<DeviceProfile>, Budgets, GapModel, usize) {
    let devices: Vec<_> = (0..n).map(|_| inst::device(rng)).collect();
    let dim = rng.random_range(500..=5000);
    let slowest = devices.iter().map(inst::train_time).fold(0.0, f64::max);
    let hungriest = devices.iter().map(inst::train_energy).fold(0.0, f64::max);
    let b = budgets(
        inst::SERVER_DELAY + slowest * rng.random_range(0.6..1.0),
        hungriest * rng.random_range(0.5..1.0),
    );
    let gap = inst::gap_model(rng, &devices, dim);
    (devices, b, gap, dim)
}

/// Best gap over a per-device grid. The gap is a sum of per-device shares and
/// each device's budgets involve only its own decisions, so the joint minimum
/// over the product grid is the sum of per-device minima.
fn brute_force(devices: &[DeviceProfile], b: &Budgets, gap: &GapModel, dim: usize) -> Option<f64> {
    let bounds = inst::control_box();
    let ratios = linspace(0.0, bounds.max_pruning, 2001);
    let powers = linspace(bounds.min_power, bounds.max_power, 100);
    let mut total = 0.0;
    for (u, d) in devices.iter().enumerate() {
        let mut best = f64::INFINITY;
        for &p in &powers {
            let per = inst::error_rate(d, p);
            for bits in 1..=bounds.max_bits {
                for &rho in &ratios {
                    if inst::feasible(d, b, dim, rho, bits, p) {
                        best = best.min(inst::gap_share(gap, u, rho, bits, per));
                    }
                }
            }
        }
        if !best.is_finite() {
            return None;
        }
        total += best;
    }
    Some(total)
}

pub fn controller_descent() -> Verdict {
    let bounds = inst::control_box();
    let config = ControllerConfig::default();

    let mut descent_failures = 0;
    let mut degraded = 0;
    let mut iterations = 0;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0800 + seed);
        let (devices, b, gap, dim) = controller_instance(&mut rng, 5);
        let problem = Problem {
            devices: &devices,
            budgets: &b,
            bounds: &bounds,
            gap: &gap,
            model_dim: dim,
            overhead_bits: inst::OVERHEAD_BITS,
        };
        let out = two_stage_control(&problem, &config, &mut rng).unwrap();
        let best = out.best_so_far();
        let monotone = best.windows(2).all(|w| w[1] <= w[0]);
        if !(monotone && out.terms.gamma <= out.initial_gamma) {
            descent_failures += 1;
        }
        degraded += out.degraded.len();
        iterations += out.trace.len() - 1;
    }

    let mut toy_failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0880 + seed);
        let (devices, b, gap, dim, optimum) = loop {
            let (devices, b, gap, dim) = controller_instance(&mut rng, 2);
            if let Some(opt) = brute_force(&devices, &b, &gap, dim) {
                break (devices, b, gap, dim, opt);
            }
        };
        let problem = Problem {
            devices: &devices,
            budgets: &b,
            bounds: &bounds,
            gap: &gap,
            model_dim: dim,
            overhead_bits: inst::OVERHEAD_BITS,
        };
        let out = two_stage_control(&problem, &config, &mut rng).unwrap();
        let s = &out.strategy;
        let feasible = (0..2).all(|u| inst::feasible(&devices[u], &b, dim, s.pruning[u], s.bits[u], s.power[u]));
        let gamma = inst::gap(&gap, &devices, &s.pruning, &s.bits, &s.power);
        let rel = (gamma - optimum) / optimum;
        worst = worst.max(rel);
        if !(feasible && rel <= RELATIVE) {
            toy_failures += 1;
        }
    }

    Verdict::new(
        descent_failures == 0 && toy_failures == 0,
        format!(
            "descent broken on {descent_failures} of {SEEDS} five-device runs \
             ({iterations} outer iterations, {degraded} degraded devices); \
             {toy_failures} of {SEEDS} two-device runs off the brute-force optimum by > 5%, worst {worst:+.2e}"
        ),
    )
}
