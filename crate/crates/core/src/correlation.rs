//! Fisher-z confidence intervals for a correlation coefficient and the
//! sample size needed to show a correlation is small.

use serde::{Deserialize, Serialize};

use crate::error::{open_interval, probability, Error, Result};
use crate::planner::MAX_COUNT;
use crate::special::normal_quantile;

pub fn fisher_z(rho: f64) -> Result<f64> {
    let rho = open_interval("rho", rho, -1.0, 1.0)?;
    Ok(libm::atanh(rho))
}

/// `(e^{2z} − 1) / (e^{2z} + 1)`.
pub fn inverse_fisher_z(z: f64) -> f64 {
    libm::tanh(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCI {
    pub rho_hat: f64,
    pub n_pairs: u64,
    pub alpha: f64,
    pub z_hat: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

/// Two-sided `1 − α` interval `ẑ ∓ z_{1−α/2} / √(n − 3)`, mapped back to the
/// correlation scale.
pub fn correlation_ci(rho_hat: f64, n_pairs: u64, alpha: f64) -> Result<CorrelationCI> {
    let alpha = probability("alpha", alpha)?;
    if n_pairs <= 3 {
        return Err(Error::Domain {
            name: "n_pairs",
            value: n_pairs as f64,
            expected: "more than 3 pairs",
        });
    }
    let z_hat = fisher_z(rho_hat)?;
    let half = normal_quantile(1.0 - alpha / 2.0)? / libm::sqrt((n_pairs - 3) as f64);
    let (z_lo, z_hi) = (z_hat - half, z_hat + half);
    Ok(CorrelationCI {
        rho_hat,
        n_pairs,
        alpha,
        z_hat,
        z_lo,
        z_hi,
        rho_lo: inverse_fisher_z(z_lo),
        rho_hi: inverse_fisher_z(z_hi),
    })
}

/// Which normal quantile enters the correlation-evidence sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileConvention {
    /// `z_{1−α/2}`, consistent with the two-sided interval.
    #[default]
    TwoSided,
    /// `z_{1−α}`; reproduces the published range 2.706 … 13.831 of z².
    OneSided,
}

impl QuantileConvention {
    pub fn quantile(self, alpha: f64) -> Result<f64> {
        let alpha = probability("alpha", alpha)?;
        match self {
            Self::TwoSided => normal_quantile(1.0 - alpha / 2.0),
            Self::OneSided => normal_quantile(1.0 - alpha),
        }
    }
}

/// Pairs needed before the half-width of the Fisher-z interval drops to
/// `√p_tol`: `⌈z² / p_tol⌉ + 3`.
pub fn correlation_evidence_sample_size(
    p_tol: f64,
    alpha: f64,
    convention: QuantileConvention,
) -> Result<u64> {
    if !(p_tol > 0.0 && p_tol <= 1.0) {
        return Err(Error::Domain {
            name: "p_tol",
            value: p_tol,
            expected: "a value in (0, 1]",
        });
    }
    let z = convention.quantile(alpha)?;
    let n = libm::ceil(z * z / p_tol) + 3.0;
    if !(n <= MAX_COUNT) {
        return Err(Error::Overflow(n));
    }
    Ok(n as u64)
}
