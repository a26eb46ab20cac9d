//! Per-sample, per-model class probabilities: entropy-binned conditional
//! error correlation and committee pooling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicator::IndicatorMatrix;

/// Tolerance on each probability row summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// `N × n × C` probabilities plus the true label of each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxTensor {
    probabilities: Vec<f64>,
    labels: Vec<usize>,
    n_models: usize,
    n_classes: usize,
    model_names: Vec<String>,
}

impl SoftmaxTensor {
    pub fn new(
        probabilities: Vec<f64>,
        labels: Vec<usize>,
        model_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self> {
        let n_models = model_names.len();
        if n_models == 0 || n_classes < 2 {
            return Err(Error::Shape(format!(
                "need at least one model and two classes, got {n_models} and {n_classes}"
            )));
        }
        let n_samples = labels.len();
        if n_samples == 0 || probabilities.len() != n_samples * n_models * n_classes {
            return Err(Error::Shape(format!(
                "{} probabilities for {} samples x {} models x {} classes",
                probabilities.len(),
                n_samples,
                n_models,
                n_classes
            )));
        }
        if let Some(s) = labels.iter().position(|&y| y >= n_classes) {
            return Err(Error::Shape(format!(
                "label {} of sample {s} is not a class index",
                labels[s]
            )));
        }
        for (r, row) in probabilities.chunks_exact(n_classes).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Shape(format!(
                    "sample {}, model {}: probabilities must be nonnegative and sum to 1 (sum {sum})",
                    r / n_models,
                    r % n_models
                )));
            }
        }
        Ok(Self {
            probabilities,
            labels,
            n_models,
            n_classes,
            model_names,
        })
    }

    pub fn with_default_names(
        probabilities: Vec<f64>,
        labels: Vec<usize>,
        n_models: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let names = (0..n_models).map(|i| format!("m{i}")).collect();
        Self::new(probabilities, labels, names, n_classes)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn row(&self, sample: usize, model: usize) -> &[f64] {
        let start = (sample * self.n_models + model) * self.n_classes;
        &self.probabilities[start..start + self.n_classes]
    }

    fn check_model(&self, model: usize) -> Result<()> {
        if model < self.n_models {
            Ok(())
        } else {
            Err(Error::Index {
                what: "models",
                index: model,
                len: self.n_models,
            })
        }
    }

    pub fn prediction(&self, sample: usize, model: usize) -> usize {
        argmax(self.row(sample, model))
    }

    /// Error indicators of the top-1 predictions.
    pub fn indicators(&self) -> IndicatorMatrix {
        let mut values = Vec::with_capacity(self.n_samples() * self.n_models);
        for s in 0..self.n_samples() {
            for m in 0..self.n_models {
                values.push(u8::from(self.prediction(s, m) != self.labels[s]));
            }
        }
        IndicatorMatrix::new(values, self.model_names.clone(), None)
            .expect("shape checked at construction")
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = k;
        }
    }
    best
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum::<f64>()
}

/// Partition of the samples into `n_bins` equal-count groups by ascending
/// summed entropy of models `i` and `j`. Ties keep sample order; the first
/// `N mod n_bins` bins get one extra sample.
pub fn entropy_bins(
    softmax: &SoftmaxTensor,
    i: usize,
    j: usize,
    n_bins: usize,
) -> Result<Vec<Vec<usize>>> {
    softmax.check_model(i)?;
    softmax.check_model(j)?;
    let n = softmax.n_samples();
    if n_bins == 0 || n < n_bins {
        return Err(Error::Shape(format!(
            "cannot split {n} samples into {n_bins} bins"
        )));
    }
    let summed: Vec<f64> = (0..n)
        .map(|s| entropy(softmax.row(s, i)) + entropy(softmax.row(s, j)))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| summed[a].total_cmp(&summed[b]).then(a.cmp(&b)));
    let base = n / n_bins;
    let extra = n % n_bins;
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let len = base + usize::from(b < extra);
        bins.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBin {
    /// 1-based, ascending entropy.
    pub bin: usize,
    pub size: usize,
    /// `None` when one of the two indicator columns is constant in the bin.
    pub rho: Option<f64>,
    pub mean_entropy: f64,
}

pub fn entropy_binned_correlation(
    softmax: &SoftmaxTensor,
    i: usize,
    j: usize,
    n_bins: usize,
) -> Result<Vec<EntropyBin>> {
    let bins = entropy_bins(softmax, i, j, n_bins)?;
    let indicators = softmax.indicators();
    bins.iter()
        .enumerate()
        .map(|(b, members)| {
            let sub = indicators.select_rows(members)?;
            let mean_entropy = members
                .iter()
                .map(|&s| entropy(softmax.row(s, i)) + entropy(softmax.row(s, j)))
                .sum::<f64>()
                / members.len() as f64;
            Ok(EntropyBin {
                bin: b + 1,
                size: members.len(),
                rho: sub.contingency(i, j)?.phi(),
                mean_entropy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteePrediction {
    pub predictions: Vec<usize>,
    /// `1` where the pooled prediction is wrong.
    pub errors: Vec<u8>,
}

impl CommitteePrediction {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.errors.iter().filter(|&&e| e == 1).count() as f64 / self.errors.len() as f64
    }
}

/// Class-wise sum of the members' probabilities, then argmax.
pub fn committee_predict(
    softmax: &SoftmaxTensor,
    members: &[usize],
) -> Result<CommitteePrediction> {
    if members.is_empty() {
        return Err(Error::Shape("a committee needs at least one member".into()));
    }
    for &m in members {
        softmax.check_model(m)?;
    }
    let c = softmax.n_classes();
    let mut pooled = alloc::vec![0.0; c];
    let mut predictions = Vec::with_capacity(softmax.n_samples());
    let mut errors = Vec::with_capacity(softmax.n_samples());
    for s in 0..softmax.n_samples() {
        pooled.iter_mut().for_each(|v| *v = 0.0);
        for &m in members {
            for (acc, p) in pooled.iter_mut().zip(softmax.row(s, m)) {
                *acc += p;
            }
        }
        let y = argmax(&pooled);
        predictions.push(y);
        errors.push(u8::from(y != softmax.labels()[s]));
    }
    Ok(CommitteePrediction {
        predictions,
        errors,
    })
}
