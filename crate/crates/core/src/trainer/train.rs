use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use super::loss::{batch_objective, LossBreakdown};
use super::model::{EnsembleModel, MemberNet};
use super::optim::Adam;
use super::view::ViewSpec;
use crate::error::{Error, Result};
use crate::indicator::{accuracies, mean_pairwise_correlation, model_accuracies};
use crate::kofn::empirical_k_of_n_all;
use crate::rng::{derive_seed, seeded, stream};
use crate::softmax::{committee_predict, SoftmaxTensor};

/// Two learning-rate phases, each ended by stagnation of the validation
/// loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub initial: f64,
    pub decayed: f64,
    /// Epochs without sufficient improvement that count as stagnation.
    pub patience: usize,
    /// Improvement of the best validation loss that resets the patience.
    pub min_improvement: f64,
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-2,
            decayed: 1e-3,
            patience: 5,
            min_improvement: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_members: usize,
    pub hidden_dim: usize,
    pub lambda: f64,
    pub batch_size: usize,
    pub schedule: LearningRateSchedule,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Share of the dataset held out for validation and reported metrics.
    pub validation_fraction: f64,
    /// Share of the remaining training split actually used.
    pub train_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_members: 5,
            hidden_dim: 16,
            lambda: 0.0,
            batch_size: 256,
            schedule: LearningRateSchedule::default(),
            weight_decay: 1e-4,
            max_epochs: 100,
            seed: 0,
            validation_fraction: 0.2,
            train_fraction: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, expected| {
            Err(Error::Domain {
                name,
                value,
                expected,
            })
        };
        if self.n_members == 0 {
            return bad("n_members", 0.0, "at least one member");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim", 0.0, "at least one hidden unit");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda, "a finite value >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size", 0.0, "at least one sample per batch");
        }
        let s = &self.schedule;
        if !(s.initial > 0.0 && s.initial.is_finite()) {
            return bad("learning_rate", s.initial, "a finite positive rate");
        }
        if !(s.decayed > 0.0 && s.decayed.is_finite()) {
            return bad("decayed_learning_rate", s.decayed, "a finite positive rate");
        }
        if s.patience == 0 {
            return bad("patience", 0.0, "at least one epoch");
        }
        if !(s.min_improvement >= 0.0) {
            return bad("min_improvement", s.min_improvement, "a value >= 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", self.weight_decay, "a finite value >= 0");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", 0.0, "at least one epoch");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(
                "validation_fraction",
                self.validation_fraction,
                "a value in (0, 1)",
            );
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction", self.train_fraction, "a value in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean of the batch objectives seen during the epoch.
    pub train_loss: f64,
    pub validation_loss: LossBreakdown,
    pub avg_accuracy: f64,
    pub joint_accuracy: f64,
    /// `None` when some member is always right or always wrong.
    pub mean_rho: Option<f64>,
    /// Accuracy of the k-out-of-n vote for `k = 1..=n`.
    pub k_of_n: Vec<f64>,
    pub member_accuracies: Vec<f64>,
    pub committee_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SecondStagnation,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub model: EnsembleModel,
    pub history: Vec<EpochMetrics>,
    pub stop_reason: StopReason,
    /// Member outputs on the held-out split after the last epoch.
    pub validation_softmax: SoftmaxTensor,
}

impl TrainingRun {
    pub fn final_metrics(&self) -> &EpochMetrics {
        self.history
            .last()
            .expect("training runs at least one epoch")
    }
}

fn epoch_metrics(
    model: &EnsembleModel,
    validation: &SyntheticDataset,
    epoch: usize,
    learning_rate: f64,
    train_loss: f64,
    validation_loss: LossBreakdown,
) -> Result<(EpochMetrics, SoftmaxTensor)> {
    let tensor = model.predict(validation)?;
    let indicators = tensor.indicators();
    let acc = accuracies(&indicators);
    let all: Vec<usize> = (0..model.n_members()).collect();
    let metrics = EpochMetrics {
        epoch,
        learning_rate,
        train_loss,
        validation_loss,
        avg_accuracy: acc.avg_accuracy,
        joint_accuracy: acc.joint_accuracy,
        mean_rho: mean_pairwise_correlation(&indicators).ok(),
        k_of_n: empirical_k_of_n_all(&indicators),
        member_accuracies: model_accuracies(&indicators),
        committee_accuracy: committee_predict(&tensor, &all)?.accuracy(),
    };
    Ok((metrics, tensor))
}

/// Mini-batch Adam on the summed cross-entropy plus decorrelation penalty.
///
/// The first `1 − validation_fraction` of `dataset` is used for training,
/// the rest for stagnation detection and the reported metrics. An empty
/// `views` slice gives every member the raw input.
pub fn train_ensemble(
    config: &TrainingConfig,
    dataset: &SyntheticDataset,
    views: &[ViewSpec],
) -> Result<TrainingRun> {
    config.validate()?;
    let views: Vec<ViewSpec> = if views.is_empty() {
        alloc::vec![ViewSpec::identity(dataset.input_dim()); config.n_members]
    } else {
        views.to_vec()
    };
    if views.len() != config.n_members {
        return Err(Error::Shape(format!(
            "{} views for {} members",
            views.len(),
            config.n_members
        )));
    }
    if let Some(v) = views.iter().find(|v| v.input_dim() != dataset.input_dim()) {
        return Err(Error::Shape(format!(
            "view expects {} inputs, dataset has {}",
            v.input_dim(),
            dataset.input_dim()
        )));
    }

    let (train, validation) = dataset.split(1.0 - config.validation_fraction)?;
    let train = if config.train_fraction < 1.0 {
        let keep = (libm::round(config.train_fraction * train.len() as f64) as usize).max(1);
        let mut idx: Vec<usize> = (0..train.len()).collect();
        idx.shuffle(&mut stream(config.seed, 1));
        idx.truncate(keep);
        idx.sort_unstable();
        train.subset(&idx)?
    } else {
        train
    };

    let members: Vec<MemberNet> = views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut rng = seeded(derive_seed(config.seed, k as u64));
            MemberNet::init(
                v.observed_dims(),
                config.hidden_dim,
                dataset.n_classes(),
                &mut rng,
            )
        })
        .collect();
    let mut model = EnsembleModel::new(members, views)?;
    let mut optimizers: Vec<Adam> = model
        .members
        .iter()
        .map(|m| Adam::new(m.params.len()))
        .collect();
    let mut grads: Vec<Vec<f64>> = model
        .members
        .iter()
        .map(|m| alloc::vec![0.0; m.params.len()])
        .collect();

    let train_viewed = model.view_inputs(train.inputs());
    let val_viewed = model.view_inputs(validation.inputs());
    let val_rows: Vec<usize> = (0..validation.len()).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = stream(config.seed, 2);

    let schedule = config.schedule;
    let mut learning_rate = schedule.initial;
    let mut second_phase = false;
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut last_tensor = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            grads
                .iter_mut()
                .for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            let loss = batch_objective(
                &model,
                &train_viewed,
                train.labels(),
                rows,
                config.lambda,
                config.weight_decay,
                Some(&mut grads),
            );
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: loss.total,
                });
            }
            for ((member, opt), g) in model.members.iter_mut().zip(&mut optimizers).zip(&grads) {
                opt.update(&mut member.params, g, learning_rate);
            }
            loss_sum += loss.total;
            n_batches += 1;
        }
        let val_loss = batch_objective(
            &model,
            &val_viewed,
            validation.labels(),
            &val_rows,
            config.lambda,
            config.weight_decay,
            None,
        );
        if !val_loss.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: n_batches,
                loss: val_loss.total,
            });
        }
        let (metrics, tensor) = epoch_metrics(
            &model,
            &validation,
            epoch,
            learning_rate,
            loss_sum / n_batches as f64,
            val_loss,
        )?;
        history.push(metrics);
        last_tensor = Some(tensor);

        if val_loss.total < best - schedule.min_improvement {
            best = val_loss.total;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= schedule.patience {
            if second_phase {
                stop_reason = StopReason::SecondStagnation;
                break;
            }
            second_phase = true;
            learning_rate = schedule.decayed;
            stale = 0;
        }
    }

    Ok(TrainingRun {
        model,
        history,
        stop_reason,
        validation_softmax: last_tensor.expect("at least one epoch ran"),
    })
}
