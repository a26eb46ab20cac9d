//! How redundancy and error correlation between subsystems change the
//! system failure probability and the test data needed to bound it.
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{probability, Error, Result};
use crate::planner::MAX_COUNT;

/// Test-data budget for `n` redundant, independent subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedundancyPlan {
    pub n_subsystems: u32,
    pub p_tol: f64,
    pub alpha: f64,
    /// Each subsystem is tested at level `α / n` against `p_tol^(1/n)`.
    pub per_subsystem_samples: u64,
    pub total_samples: u64,
    pub reduction_factor: f64,
    pub bonferroni_blowup: f64,
}

fn check_n(n: u32) -> Result<u32> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            expected: "at least one subsystem",
        });
    }
    Ok(n)
}

pub fn subsystem_sample_size(p_tol: f64, alpha: f64, n: u32) -> Result<RedundancyPlan> {
    let p_tol = probability("p_tol", p_tol)?;
    let alpha = probability("alpha", alpha)?;
    let n = check_n(n)?;
    let nf = n as f64;
    let per = libm::ceil(-libm::log(alpha / nf) / libm::pow(p_tol, 1.0 / nf));
    let total = per * nf;
    if !(total <= MAX_COUNT) {
        return Err(Error::Overflow(total));
    }
    Ok(RedundancyPlan {
        n_subsystems: n,
        p_tol,
        alpha,
        per_subsystem_samples: per as u64,
        total_samples: per as u64 * n as u64,
        reduction_factor: reduction_factor(p_tol, alpha, n)?,
        bonferroni_blowup: bonferroni_blowup(n, alpha)?,
    })
}

/// `γₙ = 1 / (n · p_tol^(1 − 1/n) · (1 − ln n / ln α))`, the ratio of the
/// single-system test volume to the total volume for `n` subsystems.
/// Equals 1 at `n = 1`.
pub fn reduction_factor(p_tol: f64, alpha: f64, n: u32) -> Result<f64> {
    let p_tol = probability("p_tol", p_tol)?;
    let nf = check_n(n)? as f64;
    let exponent = 1.0 - 1.0 / nf;
    Ok(1.0 / (nf * libm::pow(p_tol, exponent) * bonferroni_term(nf, alpha)?))
}

/// `γₙ` without the Bonferroni and separate-test-set correction,
/// `1 / (n · p_tol^(1 − 1/n))`.
pub fn uncorrected_reduction_factor(p_tol: f64, n: u32) -> Result<f64> {
    let p_tol = probability("p_tol", p_tol)?;
    let nf = check_n(n)? as f64;
    Ok(1.0 / (nf * libm::pow(p_tol, 1.0 - 1.0 / nf)))
}

fn bonferroni_term(n: f64, alpha: f64) -> Result<f64> {
    let alpha = probability("alpha", alpha)?;
    Ok(1.0 - libm::log(n) / libm::log(alpha))
}

/// `Bₙ = n (1 − ln n / ln α)`: extra test volume from testing each of `n`
/// subsystems on its own set at the Bonferroni-corrected level.
pub fn bonferroni_blowup(n: u32, alpha: f64) -> Result<f64> {
    let nf = check_n(n)? as f64;
    Ok(nf * bonferroni_term(nf, alpha)?)
}

/// Exact joint distribution of two failure indicators with given marginals
/// and Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairJointTable {
    /// Both fail.
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl PairJointTable {
    pub fn new(p1: f64, p2: f64, rho: f64) -> Result<Self> {
        let p1 = probability("p1", p1)?;
        let p2 = probability("p2", p2)?;
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                expected: "a correlation in [-1, 1]",
            });
        }
        let sd1 = libm::sqrt(p1 * (1.0 - p1));
        let sd2 = libm::sqrt(p2 * (1.0 - p2));
        let joint = rho * sd1 * sd2 + p1 * p2;
        let lower = (p1 + p2 - 1.0).max(0.0);
        let upper = p1.min(p2);
        // admit pure rounding noise at the bounds, e.g. rho = 1 with p1 = p2
        let slack = 8.0 * f64::EPSILON * upper;
        if joint < lower - slack || joint > upper + slack {
            return Err(Error::Infeasible {
                p1,
                p2,
                rho,
                joint,
                lower,
                upper,
            });
        }
        let p11 = joint.clamp(lower, upper);
        let p10 = p1 - p11;
        let p01 = p2 - p11;
        let p00 = (1.0 - p1 - p2 + p11).max(0.0);
        Ok(Self { p11, p10, p01, p00 })
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.p11, self.p10, self.p01, self.p00]
    }
}

/// Marginals and correlations of a correlated redundant system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedSystemSpec {
    pub p1: f64,
    pub p2: f64,
    pub rho_pair: f64,
    /// Correlation of the pair-failure event with the third subsystem.
    pub rho_triple: f64,
}

impl CorrelatedSystemSpec {
    pub fn validate(&self) -> Result<PairJointTable> {
        if !(-1.0..=1.0).contains(&self.rho_triple) {
            return Err(Error::Domain {
                name: "rho_triple",
                value: self.rho_triple,
                expected: "a correlation in [-1, 1]",
            });
        }
        PairJointTable::new(self.p1, self.p2, self.rho_pair)
    }
}

/// `P(F₁ ∩ F₂) = ρ σ₁ σ₂ + p₁ p₂`, rejecting combinations outside the
/// Fréchet bounds instead of clamping them.
pub fn pair_failure_probability(p1: f64, p2: f64, rho: f64) -> Result<f64> {
    let p1 = probability("p1", p1)?;
    let p2 = probability("p2", p2)?;
    PairJointTable::new(p1, p2, rho)?;
    Ok(rho * libm::sqrt(p1 * (1.0 - p1)) * libm::sqrt(p2 * (1.0 - p2)) + p1 * p2)
}

/// Small-probability form `ρ p + p²` for equal marginals.
pub fn pair_failure_probability_approx(p_sub: f64, rho: f64) -> f64 {
    rho * p_sub + p_sub * p_sub
}

/// Three-subsystem failure probability approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleApprox {
    /// `ρ₃ √ρ₁₂ p`, the headline leading-order term.
    pub leading: f64,
    /// `ρ₃ √((ρ₁₂ p + p²) p) + (ρ₁₂ p + p²) p`, before dropping the
    /// higher-order terms.
    pub expanded: f64,
    /// Bound on `|P(F₁∩F₂∩F₃) − leading|` from the dropped terms,
    /// `leading · (p/ρ₁₂ + 2p) + 2 (ρ₁₂ p + p²) p`, valid for `p ≪ ρ₁₂`.
    pub error_bound: f64,
}

/// `rho_12` is the pairwise error correlation, `rho_12_3` the correlation of
/// the pair-failure event with the third subsystem's failure.
pub fn triple_failure_probability_approx(p_sub: f64, rho_12: f64, rho_12_3: f64) -> TripleApprox {
    let pair = pair_failure_probability_approx(p_sub, rho_12);
    let leading = rho_12_3 * libm::sqrt(rho_12) * p_sub;
    let expanded = rho_12_3 * libm::sqrt(pair * p_sub) + pair * p_sub;
    // with uncorrelated pairs nothing of leading order remains
    let error_bound = if rho_12 > 0.0 {
        leading.abs() * (p_sub / rho_12 + 2.0 * p_sub) + 2.0 * pair * p_sub
    } else {
        2.0 * expanded.abs()
    };
    TripleApprox {
        leading,
        expanded,
        error_bound,
    }
}
