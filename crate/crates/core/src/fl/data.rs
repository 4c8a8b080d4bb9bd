//! Datasets: seeded Gaussian blobs and a delimited-text loader.
//!
//! Delimited format: one sample per line, the integer class label first,
//! then the feature values, separated by the configured delimiter. Blank
//! lines and lines starting with `#` are skipped.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Local dataset `𝒟ᵤ` of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDataset {
    samples: Vec<Sample>,
}

impl DeviceDataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Dataset("a device dataset needs at least one sample".into()));
        };
        let dim = first.features.len();
        if let Some(bad) = samples.iter().find(|s| s.features.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.features.len(),
            });
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.samples[0].features.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

/// A labelled pool before partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Fraction of samples per class.
    pub fn class_distribution(&self) -> Vec<f64> {
        class_distribution(&self.samples, self.n_classes)
    }

    /// Splits off the last `test` samples.
    pub fn split_test(mut self, test: usize) -> Result<(Dataset, Dataset)> {
        if test >= self.samples.len() {
            return Err(Error::Dataset(format!(
                "test split {test} leaves no training data out of {}",
                self.samples.len()
            )));
        }
        let tail = self.samples.split_off(self.samples.len() - test);
        let n_classes = self.n_classes;
        Ok((
            self,
            Dataset {
                samples: tail,
                n_classes,
            },
        ))
    }
}

pub fn class_distribution(samples: &[Sample], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for s in samples {
        counts[s.label] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

/// Isotropic Gaussian blobs around random class centres.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlobs {
    pub n_classes: usize,
    pub n_features: usize,
    /// Standard deviation of the class centres around the origin.
    pub separation: f64,
    /// Within-class standard deviation.
    pub noise: f64,
}

impl GaussianBlobs {
    /// Draws `n` samples with labels balanced to within one per class.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if self.n_classes < 2 || self.n_features == 0 {
            return Err(Error::Dataset("blobs need >= 2 classes and >= 1 feature".into()));
        }
        if !(self.separation > 0.0 && self.noise > 0.0) {
            return Err(Error::Dataset("blob separation and noise must be positive".into()));
        }
        let centres: Vec<Vec<f64>> = (0..self.n_classes)
            .map(|_| {
                (0..self.n_features)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        self.separation * z
                    })
                    .collect()
            })
            .collect();
        let mut labels: Vec<usize> = (0..n).map(|i| i % self.n_classes).collect();
        labels.shuffle(rng);
        let samples = labels
            .into_iter()
            .map(|label| Sample {
                features: centres[label]
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + self.noise * z
                    })
                    .collect(),
                label,
            })
            .collect();
        Ok(Dataset {
            samples,
            n_classes: self.n_classes,
        })
    }
}

/// Loads a delimited-text dataset. `n_classes` is inferred as `max label + 1`.
pub fn load_delimited(path: &Path, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parse_err = |what: &str, v: &str| Error::Dataset(format!("{}: record {}: bad {what} `{v}`", path.display(), line + 1));
        let mut fields = record.iter();
        let label_str = fields.next().unwrap_or_default();
        let label: usize = label_str.parse().map_err(|_| parse_err("label", label_str))?;
        let features = fields
            .map(|v| v.parse::<f64>().map_err(|_| parse_err("feature", v)))
            .collect::<Result<Vec<_>>>()?;
        if features.is_empty() {
            return Err(parse_err("record (no features)", label_str));
        }
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(Error::Dataset(format!("{} holds no samples", path.display())));
    }
    let dim = samples[0].features.len();
    if let Some(bad) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.features.len(),
        });
    }
    let n_classes = samples.iter().map(|s| s.label).max().unwrap_or(0) + 1;
    Ok(Dataset {
        samples,
        n_classes: n_classes.max(2),
    })
}
