use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Gaussian mixture with one isotropic component per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    /// Standard deviation of the class centres around the origin.
    pub center_scale: f64,
    /// Standard deviation of a sample around its class centre.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The task used for λ sweeps: overlapping classes, so that members err
    /// often enough for error correlations to be measurable.
    fn default() -> Self {
        Self {
            n_samples: 4000,
            input_dim: 8,
            n_classes: 4,
            center_scale: 1.0,
            noise: 1.0,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    n_classes: usize,
}

impl SyntheticDataset {
    pub fn new(
        inputs: Vec<f64>,
        labels: Vec<usize>,
        input_dim: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if input_dim == 0 || n_classes < 2 {
            return Err(Error::Shape(format!(
                "dataset needs input_dim >= 1 and at least 2 classes, got {input_dim} and {n_classes}"
            )));
        }
        if labels.is_empty() || inputs.len() != labels.len() * input_dim {
            return Err(Error::Shape(format!(
                "{} inputs do not match {} labels of dimension {input_dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Index {
                what: "classes",
                index: bad,
                len: n_classes,
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("inputs contain non-finite values".into()));
        }
        Ok(Self {
            inputs,
            labels,
            input_dim,
            n_classes,
        })
    }

    /// Draw the mixture. Labels cycle through the classes before shuffling,
    /// so class counts differ by at most one.
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        if spec.n_samples == 0 || !(spec.noise > 0.0) || !(spec.center_scale >= 0.0) {
            return Err(Error::Shape(
                "synthetic spec needs samples, positive noise and a nonnegative centre scale"
                    .into(),
            ));
        }
        let mut rng = stream(spec.seed, 0);
        let centers: Vec<f64> = (0..spec.n_classes * spec.input_dim)
            .map(|_| spec.center_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut labels: Vec<usize> = (0..spec.n_samples)
            .map(|i| i % spec.n_classes.max(1))
            .collect();
        labels.shuffle(&mut rng);
        let mut inputs = Vec::with_capacity(spec.n_samples * spec.input_dim);
        for &y in &labels {
            let center = &centers[y * spec.input_dim..(y + 1) * spec.input_dim];
            inputs.extend(
                center
                    .iter()
                    .map(|c| c + spec.noise * rng.sample::<f64, _>(StandardNormal)),
            );
        }
        Self::new(inputs, labels, spec.input_dim, spec.n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input(&self, sample: usize) -> &[f64] {
        &self.inputs[sample * self.input_dim..(sample + 1) * self.input_dim]
    }

    pub fn subset(&self, samples: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(samples.len() * self.input_dim);
        let mut labels = Vec::with_capacity(samples.len());
        for &s in samples {
            if s >= self.len() {
                return Err(Error::Index {
                    what: "samples",
                    index: s,
                    len: self.len(),
                });
            }
            inputs.extend_from_slice(self.input(s));
            labels.push(self.labels[s]);
        }
        Self::new(inputs, labels, self.input_dim, self.n_classes)
    }

    /// Leading `round(fraction · N)` samples and the rest.
    pub fn split(&self, fraction: f64) -> Result<(Self, Self)> {
        let cut = libm::round(fraction * self.len() as f64) as usize;
        if !(fraction > 0.0 && fraction < 1.0) || cut == 0 || cut >= self.len() {
            return Err(Error::Domain {
                name: "split fraction",
                value: fraction,
                expected: "a fraction leaving both parts nonempty",
            });
        }
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        Ok((self.subset(&head)?, self.subset(&tail)?))
    }
}
