use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use super::train::{train_ensemble, TrainingConfig, TrainingRun};
use super::view::ViewSpec;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const DEFAULT_GRID: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 100.0];

/// Final metrics of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mean_rho: Option<f64>,
    pub avg_accuracy: f64,
    pub joint_accuracy: f64,
    pub k_of_n: Vec<f64>,
    pub committee_accuracy: f64,
    pub epochs: usize,
}

impl From<&TrainingRun> for CellSummary {
    fn from(run: &TrainingRun) -> Self {
        let last = run.final_metrics();
        Self {
            mean_rho: last.mean_rho,
            avg_accuracy: last.avg_accuracy,
            joint_accuracy: last.joint_accuracy,
            k_of_n: last.k_of_n.clone(),
            committee_accuracy: last.committee_accuracy,
            epochs: run.history.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub repetition: usize,
    pub seed: u64,
    pub summary: Option<CellSummary>,
    /// Why the run failed, when it did.
    pub error: Option<String>,
}

/// Sample mean, standard deviation (n − 1 denominator) and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std,
            se: std / libm::sqrt(n as f64),
            count: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub completed: usize,
    pub failed: usize,
    pub mean_rho: Option<Stat>,
    pub avg_accuracy: Option<Stat>,
    pub joint_accuracy: Option<Stat>,
    pub k_of_n: Vec<Option<Stat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    pub repetitions: usize,
    /// Grid-major: all repetitions of the first λ, then the next.
    pub cells: Vec<SweepCell>,
    pub summary: Vec<LambdaSummary>,
}

impl SweepReport {
    /// Assemble a report from cells in grid-major order.
    pub fn from_cells(grid: &[f64], repetitions: usize, cells: Vec<SweepCell>) -> Result<Self> {
        if cells.len() != grid.len() * repetitions {
            return Err(Error::Shape(format!(
                "{} cells for a {}x{} sweep",
                cells.len(),
                grid.len(),
                repetitions
            )));
        }
        let summary = grid
            .iter()
            .enumerate()
            .map(|(g, &lambda)| {
                let ok: Vec<&CellSummary> = cells[g * repetitions..(g + 1) * repetitions]
                    .iter()
                    .filter_map(|c| c.summary.as_ref())
                    .collect();
                let n_k = ok.first().map_or(0, |s| s.k_of_n.len());
                let rhos: Vec<f64> = ok.iter().filter_map(|s| s.mean_rho).collect();
                let avg: Vec<f64> = ok.iter().map(|s| s.avg_accuracy).collect();
                let joint: Vec<f64> = ok.iter().map(|s| s.joint_accuracy).collect();
                LambdaSummary {
                    lambda,
                    completed: ok.len(),
                    failed: repetitions - ok.len(),
                    mean_rho: Stat::of(&rhos),
                    avg_accuracy: Stat::of(&avg),
                    joint_accuracy: Stat::of(&joint),
                    k_of_n: (0..n_k)
                        .map(|k| Stat::of(&ok.iter().map(|s| s.k_of_n[k]).collect::<Vec<_>>()))
                        .collect(),
                }
            })
            .collect();
        Ok(Self {
            grid: grid.to_vec(),
            repetitions,
            cells,
            summary,
        })
    }
}

/// Seed of repetition `repetition`. It does not depend on λ, so all λ of
/// one repetition start from the same initial weights and batch order.
pub fn cell_seed(master: u64, repetition: usize) -> u64 {
    derive_seed(master, repetition as u64)
}

/// Train one sweep cell, capturing a failure instead of returning it.
pub fn run_cell(
    template: &TrainingConfig,
    dataset: &SyntheticDataset,
    views: &[ViewSpec],
    lambda: f64,
    repetition: usize,
) -> SweepCell {
    let seed = cell_seed(template.seed, repetition);
    let config = TrainingConfig {
        lambda,
        seed,
        ..*template
    };
    match train_ensemble(&config, dataset, views) {
        Ok(run) => SweepCell {
            lambda,
            repetition,
            seed,
            summary: Some(CellSummary::from(&run)),
            error: None,
        },
        Err(e) => SweepCell {
            lambda,
            repetition,
            seed,
            summary: None,
            error: Some(format!("{e}")),
        },
    }
}

/// Train every `(λ, repetition)` cell sequentially.
pub fn lambda_sweep(
    template: &TrainingConfig,
    dataset: &SyntheticDataset,
    grid: &[f64],
    repetitions: usize,
    views: &[ViewSpec],
) -> Result<SweepReport> {
    if grid.is_empty() || repetitions == 0 {
        return Err(Error::Shape(
            "a sweep needs a nonempty grid and at least one repetition".into(),
        ));
    }
    if let Some(&bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Domain {
            name: "lambda",
            value: bad,
            expected: "a finite value >= 0",
        });
    }
    let mut cells = Vec::with_capacity(grid.len() * repetitions);
    for &lambda in grid {
        for rep in 0..repetitions {
            cells.push(run_cell(template, dataset, views, lambda, rep));
        }
    }
    SweepReport::from_cells(grid, repetitions, cells)
}
