//! Reliability of k-out-of-n systems: functional iff at least `k` of the `n`
//! components are functional, i.e. at most `n − k` fail.

use serde::{Deserialize, Serialize};

use crate::error::{probability, Error, Result};
use crate::indicator::IndicatorMatrix;
use crate::special::LogSumExp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KofNSpec {
    pub n: u32,
    pub k: u32,
    pub p_sub: f64,
}

impl KofNSpec {
    pub fn validate(&self) -> Result<()> {
        probability("p_sub", self.p_sub)?;
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::Domain {
                name: "k",
                value: self.k as f64,
                expected: "1 <= k <= n",
            });
        }
        Ok(())
    }

    pub fn reliability(&self) -> Result<f64> {
        theoretical_k_of_n(self.p_sub, self.n, self.k)
    }
}

fn ln_choose(n: u32, j: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(j as f64 + 1.0) - libm::lgamma((n - j) as f64 + 1.0)
}

/// `Σ_{j=k}^{n} C(n,j) (1−p)^j p^{n−j}` for independent components that each
/// fail with probability `p_sub`, summed in log space.
pub fn theoretical_k_of_n(p_sub: f64, n: u32, k: u32) -> Result<f64> {
    KofNSpec { n, k, p_sub }.validate()?;
    let ln_ok = libm::log1p(-p_sub);
    let ln_fail = libm::log(p_sub);
    let acc: LogSumExp = (k..=n)
        .map(|j| ln_choose(n, j) + j as f64 * ln_ok + (n - j) as f64 * ln_fail)
        .collect();
    Ok(libm::exp(acc.value()).min(1.0))
}

/// Fraction of samples on which at least `k` models are correct.
pub fn empirical_k_of_n(indicators: &IndicatorMatrix, k: usize) -> Result<f64> {
    let n = indicators.n_models();
    if k == 0 || k > n {
        return Err(Error::Domain {
            name: "k",
            value: k as f64,
            expected: "1 <= k <= number of models",
        });
    }
    let allowed_failures = n - k;
    let ok = indicators
        .rows()
        .filter(|row| row.iter().filter(|&&v| v == 1).count() <= allowed_failures)
        .count();
    Ok(ok as f64 / indicators.n_samples() as f64)
}

/// Empirical k-out-of-n accuracy for every `k = 1..=n`.
pub fn empirical_k_of_n_all(indicators: &IndicatorMatrix) -> alloc::vec::Vec<f64> {
    let n = indicators.n_models();
    let mut failures_hist = alloc::vec![0usize; n + 1];
    for row in indicators.rows() {
        failures_hist[row.iter().filter(|&&v| v == 1).count()] += 1;
    }
    let total = indicators.n_samples() as f64;
    (1..=n)
        .map(|k| failures_hist[..=n - k].iter().sum::<usize>() as f64 / total)
        .collect()
}
