use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::EnsembleModel;
use crate::error::{Error, Result};
use crate::softmax::argmax;

/// Lower bound on `1 − p` inside the logarithm of the penalty.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Sum over members of the mean cross-entropy.
    pub cross_entropy: f64,
    /// `λ · 2/(n−1) · Σ_{i<j} J_ij`.
    pub penalty: f64,
    /// `weight_decay · Σ ‖θ‖²`.
    pub weight_decay: f64,
    pub total: f64,
}

/// `2/(n−1)` for `n ≥ 2`, zero otherwise.
pub fn penalty_coefficient(n_members: usize) -> f64 {
    if n_members < 2 {
        0.0
    } else {
        2.0 / (n_members - 1) as f64
    }
}

/// `−ln max(1 − p_c, floor)` and, when the floor is not active,
/// `p_c / (1 − p_c)`, the factor of its logit gradient. `1 − p_c` is summed
/// from the other classes to keep precision when `p_c` is near one.
fn neg_log_complement(probs: &[f64], c: usize) -> (f64, Option<f64>) {
    let rest: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != c)
        .map(|(_, p)| p)
        .sum();
    if rest < PROBABILITY_FLOOR {
        (-libm::log(PROBABILITY_FLOOR), None)
    } else {
        (-libm::log(rest), Some(probs[c] / rest))
    }
}

fn check_probabilities(probs: &[f64], labels: &[usize]) -> Result<usize> {
    if labels.is_empty() || probs.is_empty() || !probs.len().is_multiple_of(labels.len()) {
        return Err(Error::Shape(format!(
            "{} probabilities do not form rows for {} samples",
            probs.len(),
            labels.len()
        )));
    }
    let c = probs.len() / labels.len();
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Index {
            what: "classes",
            index: bad,
            len: c,
        });
    }
    Ok(c)
}

/// `J_ij` from the members' softmax outputs, each row-major `M × C`.
pub fn pairwise_decorrelation_loss(
    probs_i: &[f64],
    probs_j: &[f64],
    labels: &[usize],
) -> Result<f64> {
    let c = check_probabilities(probs_i, labels)?;
    if probs_j.len() != probs_i.len() {
        return Err(Error::Shape(
            "both members must cover the same samples and classes".into(),
        ));
    }
    let mut sum = 0.0;
    for (m, &y) in labels.iter().enumerate() {
        let pi = &probs_i[m * c..(m + 1) * c];
        let pj = &probs_j[m * c..(m + 1) * c];
        let (hi, hj) = (argmax(pi), argmax(pj));
        if hi != y {
            sum += neg_log_complement(pj, hi).0;
        }
        if hj != y {
            sum += neg_log_complement(pi, hj).0;
        }
    }
    Ok(sum / labels.len() as f64)
}

/// `λ · 2/(n−1) · Σ_{i<j} J_ij` over the members' softmax outputs.
pub fn ensemble_penalty(member_probs: &[Vec<f64>], labels: &[usize], lambda: f64) -> Result<f64> {
    let coef = penalty_coefficient(member_probs.len());
    if lambda == 0.0 || coef == 0.0 {
        for p in member_probs {
            check_probabilities(p, labels)?;
        }
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..member_probs.len() {
        for j in 0..i {
            sum += pairwise_decorrelation_loss(&member_probs[i], &member_probs[j], labels)?;
        }
    }
    Ok(lambda * coef * sum)
}

/// Objective on the rows `rows` of pre-viewed inputs, optionally
/// accumulating gradients into `grads` (one vector per member, added to).
pub(crate) fn batch_objective(
    model: &EnsembleModel,
    viewed: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
    lambda: f64,
    weight_decay: f64,
    mut grads: Option<&mut [Vec<f64>]>,
) -> LossBreakdown {
    let n = model.n_members();
    let c = model.n_classes();
    let m_inv = 1.0 / rows.len() as f64;
    let pen_scale = lambda * penalty_coefficient(n) * m_inv;
    let with_penalty = pen_scale != 0.0;
    let max_hidden = model
        .members
        .iter()
        .map(|m| m.hidden_dim)
        .max()
        .unwrap_or(0);

    let mut pre = alloc::vec![0.0; n * max_hidden];
    let mut logits = alloc::vec![0.0; c];
    let mut probs = alloc::vec![0.0; n * c];
    let mut dz = alloc::vec![0.0; n * c];
    let mut predicted = alloc::vec![0usize; n];
    let mut hidden_scratch = alloc::vec![0.0; max_hidden];

    let mut cross_entropy = 0.0;
    let mut penalty_sum = 0.0;
    for &s in rows {
        let y = labels[s];
        for (k, member) in model.members.iter().enumerate() {
            let d = member.input_dim;
            let h = member.hidden_dim;
            let x = &viewed[k][s * d..(s + 1) * d];
            let lse = member.forward(
                x,
                &mut pre[k * max_hidden..k * max_hidden + h],
                &mut logits,
                &mut probs[k * c..(k + 1) * c],
            );
            cross_entropy += lse - logits[y];
            predicted[k] = argmax(&probs[k * c..(k + 1) * c]);
            for (q, (g, p)) in dz[k * c..(k + 1) * c]
                .iter_mut()
                .zip(&probs[k * c..(k + 1) * c])
                .enumerate()
            {
                *g = m_inv * (p - if q == y { 1.0 } else { 0.0 });
            }
        }
        if with_penalty {
            for (i, &ci) in predicted.iter().enumerate() {
                if ci == y {
                    continue;
                }
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let pj = &probs[j * c..(j + 1) * c];
                    let (value, ratio) = neg_log_complement(pj, ci);
                    penalty_sum += value;
                    if let Some(ratio) = ratio {
                        // d(−ln(1 − p_c))/dz = p_c/(1 − p_c) · (e_c − p)
                        for (q, (g, p)) in dz[j * c..(j + 1) * c].iter_mut().zip(pj).enumerate() {
                            let e = if q == ci { 1.0 } else { 0.0 };
                            *g += pen_scale * ratio * (e - p);
                        }
                    }
                }
            }
        }
        if let Some(grads) = grads.as_deref_mut() {
            for (k, member) in model.members.iter().enumerate() {
                let d = member.input_dim;
                let h = member.hidden_dim;
                member.backward(
                    &viewed[k][s * d..(s + 1) * d],
                    &pre[k * max_hidden..k * max_hidden + h],
                    &dz[k * c..(k + 1) * c],
                    &mut grads[k],
                    &mut hidden_scratch[..h],
                );
            }
        }
    }

    if let Some(grads) = grads {
        if weight_decay != 0.0 {
            for (g, member) in grads.iter_mut().zip(&model.members) {
                for (gv, p) in g.iter_mut().zip(&member.params) {
                    *gv += 2.0 * weight_decay * p;
                }
            }
        }
    }
    let cross_entropy = cross_entropy * m_inv;
    let penalty = pen_scale * penalty_sum;
    let decay = if weight_decay == 0.0 {
        0.0
    } else {
        weight_decay * model.squared_norm()
    };
    LossBreakdown {
        cross_entropy,
        penalty,
        weight_decay: decay,
        total: cross_entropy + penalty + decay,
    }
}

fn check_batch(model: &EnsembleModel, inputs: &[f64], labels: &[usize], lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            expected: "a finite value >= 0",
        });
    }
    let d = model.input_dim();
    if labels.is_empty() || inputs.len() != labels.len() * d {
        return Err(Error::Shape(format!(
            "{} inputs do not match {} labels of dimension {d}",
            inputs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.n_classes()) {
        return Err(Error::Index {
            what: "classes",
            index: bad,
            len: model.n_classes(),
        });
    }
    Ok(())
}

/// Summed cross-entropy plus penalty plus weight decay on one batch of raw
/// (unviewed) inputs.
pub fn total_loss(
    model: &EnsembleModel,
    inputs: &[f64],
    labels: &[usize],
    lambda: f64,
    weight_decay: f64,
) -> Result<LossBreakdown> {
    check_batch(model, inputs, labels, lambda)?;
    let viewed = model.view_inputs(inputs);
    let rows: Vec<usize> = (0..labels.len()).collect();
    Ok(batch_objective(
        model,
        &viewed,
        labels,
        &rows,
        lambda,
        weight_decay,
        None,
    ))
}

/// [`total_loss`] and its gradient with respect to every member's
/// parameters. Misclassification indicators are held constant.
pub fn total_loss_gradient(
    model: &EnsembleModel,
    inputs: &[f64],
    labels: &[usize],
    lambda: f64,
    weight_decay: f64,
) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
    check_batch(model, inputs, labels, lambda)?;
    let viewed = model.view_inputs(inputs);
    let rows: Vec<usize> = (0..labels.len()).collect();
    let mut grads: Vec<Vec<f64>> = model
        .members
        .iter()
        .map(|m| alloc::vec![0.0; m.params.len()])
        .collect();
    let loss = batch_objective(
        model,
        &viewed,
        labels,
        &rows,
        lambda,
        weight_decay,
        Some(&mut grads),
    );
    Ok((loss, grads))
}
