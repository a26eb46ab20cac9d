//! Binary error-indicator matrices and the statistics computed from them:
//! pairwise Pearson correlation, the χ² independence test, and average and
//! joint accuracy.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::chi_square_sf;

/// `N × n` matrix of failure indicators, `1` where a model misclassifies a
/// sample. Stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    values: Vec<u8>,
    n_samples: usize,
    model_names: Vec<String>,
    sample_ids: Option<Vec<String>>,
}

impl IndicatorMatrix {
    pub fn new(
        values: Vec<u8>,
        model_names: Vec<String>,
        sample_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n_models = model_names.len();
        if n_models == 0 {
            return Err(Error::Shape(
                "an indicator matrix needs at least one model".into(),
            ));
        }
        if values.is_empty() || !values.len().is_multiple_of(n_models) {
            return Err(Error::Shape(format!(
                "{} cells do not form nonempty rows of {} models",
                values.len(),
                n_models
            )));
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::Shape(format!(
                "cell at row {}, column {} is {}, expected 0 or 1",
                pos / n_models,
                pos % n_models,
                values[pos]
            )));
        }
        let n_samples = values.len() / n_models;
        if let Some(ids) = &sample_ids {
            if ids.len() != n_samples {
                return Err(Error::Shape(format!(
                    "{} sample ids for {} rows",
                    ids.len(),
                    n_samples
                )));
            }
        }
        Ok(Self {
            values,
            n_samples,
            model_names,
            sample_ids,
        })
    }

    /// Matrix with generated model names `m0, m1, …` and no sample ids.
    pub fn from_rows(values: Vec<u8>, n_models: usize) -> Result<Self> {
        let names = (0..n_models).map(|i| format!("m{i}")).collect();
        Self::new(values, names, None)
    }

    /// Build from per-model columns of equal length.
    pub fn from_columns(columns: &[Vec<u8>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(n * columns.len());
        for row in 0..n {
            values.extend(columns.iter().map(|c| c[row]));
        }
        Self::from_rows(values, columns.len())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn row(&self, sample: usize) -> &[u8] {
        let n = self.n_models();
        &self.values[sample * n..(sample + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.values.chunks_exact(self.n_models())
    }

    pub fn get(&self, sample: usize, model: usize) -> u8 {
        self.values[sample * self.n_models() + model]
    }

    pub fn column(&self, model: usize) -> impl Iterator<Item = u8> + '_ {
        self.values
            .iter()
            .skip(model)
            .step_by(self.n_models())
            .copied()
    }

    /// Rows restricted to `samples`, in the given order.
    pub fn select_rows(&self, samples: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(samples.len() * self.n_models());
        for &s in samples {
            if s >= self.n_samples {
                return Err(Error::Index {
                    what: "samples",
                    index: s,
                    len: self.n_samples,
                });
            }
            values.extend_from_slice(self.row(s));
        }
        let ids = self
            .sample_ids
            .as_ref()
            .map(|ids| samples.iter().map(|&s| ids[s].clone()).collect());
        Self::new(values, self.model_names.clone(), ids)
    }

    fn check_model(&self, model: usize) -> Result<()> {
        if model < self.n_models() {
            Ok(())
        } else {
            Err(Error::Index {
                what: "models",
                index: model,
                len: self.n_models(),
            })
        }
    }

    /// Joint error counts of two models.
    pub fn contingency(&self, i: usize, j: usize) -> Result<ContingencyTable> {
        self.check_model(i)?;
        self.check_model(j)?;
        let mut t = ContingencyTable::default();
        for row in self.rows() {
            match (row[i], row[j]) {
                (1, 1) => t.both += 1,
                (1, 0) => t.first_only += 1,
                (0, 1) => t.second_only += 1,
                _ => t.neither += 1,
            }
        }
        Ok(t)
    }
}

/// 2×2 table of error counts for a pair of models.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub both: u64,
    pub first_only: u64,
    pub second_only: u64,
    pub neither: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.both + self.first_only + self.second_only + self.neither
    }

    /// Phi coefficient, which is the Pearson correlation of the two binary
    /// columns. `None` when either column is constant.
    pub fn phi(&self) -> Option<f64> {
        let (a, b, c, d) = self.as_f64();
        let r1 = a + b;
        let r0 = c + d;
        let c1 = a + c;
        let c0 = b + d;
        if r1 == 0.0 || r0 == 0.0 || c1 == 0.0 || c0 == 0.0 {
            return None;
        }
        let num = a * d - b * c;
        Some((num / libm::sqrt((r1 * r0) * (c1 * c0))).clamp(-1.0, 1.0))
    }

    /// Pearson χ² statistic without continuity correction.
    pub fn chi_square(&self) -> Option<f64> {
        let (a, b, c, d) = self.as_f64();
        let n = a + b + c + d;
        let rows = [a + b, c + d];
        let cols = [a + c, b + d];
        let observed = [[a, b], [c, d]];
        let mut stat = 0.0;
        for (r, row) in observed.iter().enumerate() {
            for (k, &obs) in row.iter().enumerate() {
                let expected = rows[r] * cols[k] / n;
                if expected <= 0.0 {
                    return None;
                }
                let diff = obs - expected;
                stat += diff * diff / expected;
            }
        }
        Some(stat)
    }

    fn as_f64(&self) -> (f64, f64, f64, f64) {
        (
            self.both as f64,
            self.first_only as f64,
            self.second_only as f64,
            self.neither as f64,
        )
    }
}

/// Sample Pearson correlation of the error indicators of models `i` and `j`.
pub fn error_correlation(indicators: &IndicatorMatrix, i: usize, j: usize) -> Result<f64> {
    let table = indicators.contingency(i, j)?;
    table.phi().ok_or_else(|| {
        let constant_first =
            table.both + table.first_only == 0 || table.second_only + table.neither == 0;
        Error::DegenerateVariance {
            column: if constant_first { i } else { j },
        }
    })
}

/// All pairwise correlations, row-major `n × n` with unit diagonal.
pub fn correlation_matrix(indicators: &IndicatorMatrix) -> Result<Vec<f64>> {
    let n = indicators.n_models();
    let mut out = alloc::vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
        for j in i + 1..n {
            let r = error_correlation(indicators, i, j)?;
            out[i * n + j] = r;
            out[j * n + i] = r;
        }
    }
    // a single model still needs a defined variance
    if n == 1 {
        let ones = indicators.column(0).filter(|&v| v == 1).count();
        if ones == 0 || ones == indicators.n_samples() {
            return Err(Error::DegenerateVariance { column: 0 });
        }
    }
    Ok(out)
}

/// Mean of the strict upper triangle of the correlation matrix.
pub fn mean_pairwise_correlation(indicators: &IndicatorMatrix) -> Result<f64> {
    let n = indicators.n_models();
    if n < 2 {
        return Err(Error::Shape(
            "mean pairwise correlation needs at least two models".into(),
        ));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += error_correlation(indicators, i, j)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub p_value: f64,
    pub reject_independence: bool,
}

/// Pearson χ² test (one degree of freedom) of independence of two error
/// indicators.
pub fn chi_square_independence(
    indicators: &IndicatorMatrix,
    i: usize,
    j: usize,
    alpha: f64,
) -> Result<ChiSquareTest> {
    let alpha = crate::error::probability("alpha", alpha)?;
    let statistic = indicators
        .contingency(i, j)?
        .chi_square()
        .ok_or(Error::ZeroExpectedCount { i, j })?;
    let p_value = chi_square_sf(statistic, 1.0)?;
    Ok(ChiSquareTest {
        statistic,
        p_value,
        reject_independence: p_value < alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    /// Mean per-model accuracy.
    pub avg_accuracy: f64,
    /// Fraction of samples on which not every model errs.
    pub joint_accuracy: f64,
}

pub fn accuracies(indicators: &IndicatorMatrix) -> Accuracies {
    let n = indicators.n_models() as f64;
    let total = indicators.n_samples() as f64;
    let errors = indicators.values().iter().filter(|&&v| v == 1).count() as f64;
    let all_wrong = indicators
        .rows()
        .filter(|r| r.iter().all(|&v| v == 1))
        .count() as f64;
    Accuracies {
        avg_accuracy: 1.0 - errors / (n * total),
        joint_accuracy: 1.0 - all_wrong / total,
    }
}

/// Per-model accuracy.
pub fn model_accuracies(indicators: &IndicatorMatrix) -> Vec<f64> {
    let total = indicators.n_samples() as f64;
    (0..indicators.n_models())
        .map(|m| 1.0 - indicators.column(m).filter(|&v| v == 1).count() as f64 / total)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairChiSquare {
    pub i: usize,
    pub j: usize,
    pub stat: f64,
    pub p: f64,
}

/// Everything `analyze` reports about an indicator matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_samples: usize,
    pub model_names: Vec<String>,
    /// Row-major `n × n`.
    pub pairwise_rho: Vec<f64>,
    pub mean_rho: f64,
    pub chi2: Vec<PairChiSquare>,
    pub avg_accuracy: f64,
    pub joint_accuracy: f64,
}

pub fn correlation_report(indicators: &IndicatorMatrix, alpha: f64) -> Result<CorrelationReport> {
    let n = indicators.n_models();
    let pairwise_rho = correlation_matrix(indicators)?;
    let mut chi2 = Vec::new();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += pairwise_rho[i * n + j];
            let test = chi_square_independence(indicators, i, j, alpha)?;
            chi2.push(PairChiSquare {
                i,
                j,
                stat: test.statistic,
                p: test.p_value,
            });
        }
    }
    let mean_rho = if chi2.is_empty() {
        1.0
    } else {
        sum / chi2.len() as f64
    };
    let acc = accuracies(indicators);
    Ok(CorrelationReport {
        n_samples: indicators.n_samples(),
        model_names: indicators.model_names().to_vec(),
        pairwise_rho,
        mean_rho,
        chi2,
        avg_accuracy: acc.avg_accuracy,
        joint_accuracy: acc.joint_accuracy,
    })
}
