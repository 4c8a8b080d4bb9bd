//! Splitting a training set across devices.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::config::{PartitionConfig, PartitionKind};
use crate::error::{Error, Result};
use crate::fl::{Dataset, DeviceDataset, Sample};

/// Splits `total` units into shares proportional to `weights`,
/// rounding by largest remainder (ties to the lower index).
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Per-device sample counts drawn from `[min_samples, max_samples]`, rescaled
/// to `available` if configured. Every device gets at least one sample.
pub fn device_sizes<R: Rng + ?Sized>(
    available: usize,
    devices: usize,
    config: &PartitionConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if devices == 0 {
        return Err(Error::Config("need at least one device".into()));
    }
    if available < devices {
        return Err(Error::Config(format!(
            "{available} training samples cannot give each of {devices} devices one sample"
        )));
    }
    let drawn: Vec<usize> = (0..devices)
        .map(|_| rng.random_range(config.min_samples..=config.max_samples))
        .collect();
    if !config.scale_to_dataset {
        let need: usize = drawn.iter().sum();
        if need > available {
            return Err(Error::Config(format!(
                "devices need {need} samples but the training set has {available}; enable scale_to_dataset"
            )));
        }
        return Ok(drawn);
    }
    let weights: Vec<f64> = drawn.iter().map(|&n| n as f64).collect();
    let mut sizes = apportion(&weights, available);
    while let Some(empty) = sizes.iter().position(|&n| n == 0) {
        let largest = (0..devices).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap_or(0);
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
    Ok(sizes)
}

/// Class mixture drawn from a symmetric Dirichlet through normalized Gamma draws.
fn dirichlet<R: Rng + ?Sized>(alpha: f64, classes: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid("alpha", e.to_string()))?;
    let draws: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        return Ok(draws.into_iter().map(|d| d / sum).collect());
    }
    // Every draw underflowed: the limit of a vanishing concentration is a point mass.
    let mut point = vec![0.0; classes];
    point[rng.random_range(0..classes)] = 1.0;
    Ok(point)
}

/// Assigns the training set to `devices` devices.
///
/// IID shuffles and cuts the set by the device sizes. Dirichlet draws a class
/// mixture per device and fills its quota class by class; when a class runs
/// out the shortfall comes from the classes with the most samples left. When
/// the devices take the whole set, the last ones get the leftovers, which
/// softens their skew.
pub fn partition_data<R: Rng + ?Sized>(
    dataset: &Dataset,
    devices: usize,
    config: &PartitionConfig,
    rng: &mut R,
) -> Result<Vec<DeviceDataset>> {
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot partition an empty dataset".into()));
    }
    let sizes = device_sizes(dataset.len(), devices, config, rng)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);

    let groups: Vec<Vec<usize>> = match config.kind {
        PartitionKind::Iid => {
            let mut rest = order.as_slice();
            sizes
                .iter()
                .map(|&n| {
                    let (head, tail) = rest.split_at(n);
                    rest = tail;
                    head.to_vec()
                })
                .collect()
        }
        PartitionKind::Dirichlet => {
            let classes = dataset.n_classes;
            let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for i in order {
                pools[dataset.samples[i].label].push(i);
            }
            let mut groups = Vec::with_capacity(devices);
            for &n in &sizes {
                let mix = dirichlet(config.alpha, classes, rng)?;
                let wanted = apportion(&mix, n);
                let mut group = Vec::with_capacity(n);
                for (pool, &want) in pools.iter_mut().zip(&wanted) {
                    let take = want.min(pool.len());
                    group.extend(pool.drain(pool.len() - take..));
                }
                while group.len() < n {
                    let fullest = (0..classes).max_by_key(|&k| (pools[k].len(), std::cmp::Reverse(k))).unwrap_or(0);
                    match pools[fullest].pop() {
                        Some(i) => group.push(i),
                        None => break,
                    }
                }
                groups.push(group);
            }
            groups
        }
    };

    groups
        .into_iter()
        .map(|g| {
            let samples: Vec<Sample> = g.into_iter().map(|i| dataset.samples[i].clone()).collect();
            DeviceDataset::new(samples)
        })
        .collect()
}
