use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use super::view::ViewSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::softmax::SoftmaxTensor;

pub const LEAKY_SLOPE: f64 = 0.01;

pub(crate) fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub(crate) fn leaky_slope(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// One-hidden-layer classifier. Parameters are stored flat as
/// `[W1 (hidden × input), b1 (hidden), W2 (classes × hidden), b2 (classes)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberNet {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub params: Vec<f64>,
}

impl MemberNet {
    pub fn parameter_count(input_dim: usize, hidden_dim: usize, n_classes: usize) -> usize {
        hidden_dim * input_dim + hidden_dim + n_classes * hidden_dim + n_classes
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, n_classes: usize, rng: &mut Rng) -> Self {
        let mut params = alloc::vec![0.0; Self::parameter_count(input_dim, hidden_dim, n_classes)];
        let mut net = Self {
            input_dim,
            hidden_dim,
            n_classes,
            params: Vec::new(),
        };
        let [w1, _, w2, _] = net.group_ranges();
        let limit1 = libm::sqrt(6.0 / (input_dim + hidden_dim) as f64);
        for v in &mut params[w1] {
            *v = rng.random_range(-limit1..limit1);
        }
        let limit2 = libm::sqrt(6.0 / (hidden_dim + n_classes) as f64);
        for v in &mut params[w2] {
            *v = rng.random_range(-limit2..limit2);
        }
        net.params = params;
        net
    }

    /// Index ranges of `W1, b1, W2, b2` inside `params`.
    pub fn group_ranges(&self) -> [core::ops::Range<usize>; 4] {
        let (i, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        let a = h * i;
        let b = a + h;
        let d = b + c * h;
        [0..a, a..b, b..d, d..d + c]
    }

    /// Forward pass for one input. Writes hidden pre-activations into `pre`,
    /// logits into `logits` and softmax probabilities into `probs`; returns
    /// `ln Σ exp(z)`.
    pub fn forward(
        &self,
        x: &[f64],
        pre: &mut [f64],
        logits: &mut [f64],
        probs: &mut [f64],
    ) -> f64 {
        let (i, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        let [w1, b1, w2, b2] = self.group_ranges();
        let (w1, b1, w2, b2) = (
            &self.params[w1],
            &self.params[b1],
            &self.params[w2],
            &self.params[b2],
        );
        for k in 0..h {
            let row = &w1[k * i..(k + 1) * i];
            pre[k] = b1[k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        for k in 0..c {
            let row = &w2[k * h..(k + 1) * h];
            logits[k] = b2[k]
                + row
                    .iter()
                    .zip(pre.iter())
                    .map(|(w, &v)| w * leaky(v))
                    .sum::<f64>();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, z) in probs.iter_mut().zip(logits.iter()) {
            *p = libm::exp(z - max);
            sum += *p;
        }
        for z in probs.iter_mut() {
            *z /= sum;
        }
        max + libm::log(sum)
    }

    /// Accumulate parameter gradients for one input given `dL/dz`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        pre: &[f64],
        dz: &[f64],
        grad: &mut [f64],
        hidden_scratch: &mut [f64],
    ) {
        let (i, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        let [w1r, b1r, w2r, b2r] = self.group_ranges();
        let w2 = &self.params[w2r.clone()];
        for (g, d) in grad[b2r].iter_mut().zip(dz) {
            *g += d;
        }
        {
            let gw2 = &mut grad[w2r];
            for k in 0..c {
                if dz[k] == 0.0 {
                    continue;
                }
                for (g, &p) in gw2[k * h..(k + 1) * h].iter_mut().zip(pre) {
                    *g += dz[k] * leaky(p);
                }
            }
        }
        for (m, dh) in hidden_scratch.iter_mut().enumerate().take(h) {
            let back: f64 = (0..c).map(|k| w2[k * h + m] * dz[k]).sum();
            *dh = back * leaky_slope(pre[m]);
        }
        for (g, d) in grad[b1r].iter_mut().zip(hidden_scratch.iter()) {
            *g += d;
        }
        let gw1 = &mut grad[w1r];
        for m in 0..h {
            let dh = hidden_scratch[m];
            if dh == 0.0 {
                continue;
            }
            for (g, v) in gw1[m * i..(m + 1) * i].iter_mut().zip(x) {
                *g += dh * v;
            }
        }
    }
}

/// Members together with the view each of them receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<MemberNet>,
    pub views: Vec<ViewSpec>,
}

impl EnsembleModel {
    pub fn new(members: Vec<MemberNet>, views: Vec<ViewSpec>) -> Result<Self> {
        if members.is_empty() || members.len() != views.len() {
            return Err(Error::Shape(format!(
                "{} members with {} views",
                members.len(),
                views.len()
            )));
        }
        let classes = members[0].n_classes;
        for (k, (m, v)) in members.iter().zip(&views).enumerate() {
            if m.n_classes != classes {
                return Err(Error::Shape(format!(
                    "member {k} has {} classes, expected {classes}",
                    m.n_classes
                )));
            }
            if m.input_dim != v.observed_dims() {
                return Err(Error::Shape(format!(
                    "member {k} expects {} inputs but its view yields {}",
                    m.input_dim,
                    v.observed_dims()
                )));
            }
            if m.params.len() != MemberNet::parameter_count(m.input_dim, m.hidden_dim, m.n_classes)
            {
                return Err(Error::Shape(format!(
                    "member {k} has a wrongly sized parameter vector"
                )));
            }
            if m.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Shape(format!(
                    "member {k} has non-finite parameters"
                )));
            }
        }
        Ok(Self { members, views })
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_classes(&self) -> usize {
        self.members[0].n_classes
    }

    pub fn input_dim(&self) -> usize {
        self.views[0].input_dim()
    }

    /// Each member's view of a row-major input matrix.
    pub fn view_inputs(&self, inputs: &[f64]) -> Vec<Vec<f64>> {
        self.views.iter().map(|v| v.apply_rows(inputs)).collect()
    }

    /// Member softmax outputs for every sample, as an `N × n × C` tensor.
    pub fn predict(&self, dataset: &SyntheticDataset) -> Result<SoftmaxTensor> {
        if dataset.input_dim() != self.input_dim() || dataset.n_classes() != self.n_classes() {
            return Err(Error::Shape(
                "dataset does not match the ensemble's input or class count".into(),
            ));
        }
        let viewed = self.view_inputs(dataset.inputs());
        let (n, c) = (self.n_members(), self.n_classes());
        let mut probs = alloc::vec![0.0; dataset.len() * n * c];
        let max_hidden = self.members.iter().map(|m| m.hidden_dim).max().unwrap_or(0);
        let mut pre = alloc::vec![0.0; max_hidden];
        let mut logits = alloc::vec![0.0; c];
        for s in 0..dataset.len() {
            for (k, member) in self.members.iter().enumerate() {
                let d = member.input_dim;
                let x = &viewed[k][s * d..(s + 1) * d];
                let out = &mut probs[(s * n + k) * c..(s * n + k + 1) * c];
                member.forward(x, &mut pre[..member.hidden_dim], &mut logits, out);
            }
        }
        let names: Vec<String> = (0..n).map(|k| format!("member{k}")).collect();
        SoftmaxTensor::new(probs, dataset.labels().to_vec(), names, c)
    }

    pub fn squared_norm(&self) -> f64 {
        self.members
            .iter()
            .flat_map(|m| m.params.iter())
            .map(|p| p * p)
            .sum()
    }
}
