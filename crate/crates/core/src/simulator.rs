//! Correlated binary failure processes for Monte Carlo checks of the closed
//! forms.
//!
//! Two generators are provided. [`sample_pair`] draws from the exact 2×2
//! joint table implied by two marginals and a correlation, which admits
//! negative correlation. [`sample_ensemble`] draws an exchangeable vector
//! from a common-shock model: with probability `θ` every member fails,
//! otherwise members fail independently with probability `q`.
//!
//! Rows are produced in blocks of [`BLOCK_ROWS`], block `b` using ChaCha
//! stream `b` of the seed. The output therefore does not depend on how
//! blocks are distributed over threads.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{probability, Error, Result};
use crate::indicator::IndicatorMatrix;
use crate::redundancy::PairJointTable;
use crate::rng::{blocks, stream, BLOCK_ROWS};

const CALIBRATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonShockSpec {
    pub p: f64,
    pub rho: f64,
    pub n_members: usize,
    pub theta: f64,
    pub q: f64,
}

impl CommonShockSpec {
    /// Calibrated model for marginal `p`, pairwise correlation `rho`.
    pub fn new(p: f64, rho: f64, n_members: usize) -> Result<Self> {
        if n_members < 2 {
            return Err(Error::Domain {
                name: "n_members",
                value: n_members as f64,
                expected: "at least 2 members",
            });
        }
        let (theta, q) = calibrate_common_shock(p, rho)?;
        Ok(Self {
            p,
            rho,
            n_members,
            theta,
            q,
        })
    }

    /// Correlation between two members implied by `(θ, q)`.
    pub fn implied_correlation(&self) -> f64 {
        implied_correlation(self.theta, self.q)
    }

    /// `P(all members of a subset of size m fail) = θ + (1 − θ) qᵐ`.
    pub fn joint_failure_probability(&self, m: usize) -> f64 {
        self.theta + (1.0 - self.theta) * libm::pow(self.q, m as f64)
    }
}

/// Correlation of two members of a common-shock model.
pub fn implied_correlation(theta: f64, q: f64) -> f64 {
    let p = theta + (1.0 - theta) * q;
    let both = theta + (1.0 - theta) * q * q;
    (both - p * p) / (p * (1.0 - p))
}

/// Solve `θ + (1−θ)q = p` and `θ + (1−θ)q² = ρp(1−p) + p²` for `(θ, q)` by
/// bisection on `θ ∈ [0, p]`.
pub fn calibrate_common_shock(p: f64, rho: f64) -> Result<(f64, f64)> {
    let p = probability("p", p)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain {
            name: "rho",
            value: rho,
            expected: "a correlation in [0, 1)",
        });
    }
    let target = rho * p * (1.0 - p) + p * p;
    let q_of = |theta: f64| (p - theta) / (1.0 - theta);
    // increasing in θ: f' = ((1 − p)/(1 − θ))²
    let f = |theta: f64| {
        let q = q_of(theta);
        theta + (1.0 - theta) * q * q - target
    };
    let (mut lo, mut hi) = (0.0f64, p);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok((0.0, p));
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoRoot(
            "common-shock residual does not change sign on [0, p]",
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = if f(hi).abs() < f(lo).abs() { hi } else { lo };
    if f(theta).abs() >= CALIBRATION_TOLERANCE {
        return Err(Error::NoRoot(
            "bisection did not reach the residual tolerance",
        ));
    }
    Ok((theta, q_of(theta).max(0.0)))
}

/// One block of rows from the exact 2×2 joint table, row-major with two
/// columns.
pub fn pair_block(table: &PairJointTable, seed: u64, block: u64, rows: usize) -> Vec<u8> {
    let mut rng = stream(seed, block);
    let c11 = table.p11;
    let c10 = c11 + table.p10;
    let c01 = c10 + table.p01;
    let mut out = Vec::with_capacity(2 * rows);
    for _ in 0..rows {
        let u: f64 = rng.random();
        let cell: [u8; 2] = if u < c11 {
            [1, 1]
        } else if u < c10 {
            [1, 0]
        } else if u < c01 {
            [0, 1]
        } else {
            [0, 0]
        };
        out.extend_from_slice(&cell);
    }
    out
}

/// One block of common-shock rows, row-major with `spec.n_members` columns.
pub fn ensemble_block(spec: &CommonShockSpec, seed: u64, block: u64, rows: usize) -> Vec<u8> {
    let mut rng = stream(seed, block);
    let n = spec.n_members;
    let mut out = Vec::with_capacity(n * rows);
    for _ in 0..rows {
        let shock: f64 = rng.random();
        if shock < spec.theta {
            out.extend(core::iter::repeat_n(1u8, n));
        } else {
            out.extend((0..n).map(|_| u8::from(rng.random::<f64>() < spec.q)));
        }
    }
    out
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::Domain {
            name: "n_samples",
            value: 0.0,
            expected: "at least one sample",
        });
    }
    Ok(())
}

/// I.i.d. pairs with marginals `p1`, `p2` and correlation `rho`.
pub fn sample_pair(
    p1: f64,
    p2: f64,
    rho: f64,
    n_samples: usize,
    seed: u64,
) -> Result<IndicatorMatrix> {
    let table = PairJointTable::new(p1, p2, rho)?;
    check_samples(n_samples)?;
    let mut values = Vec::with_capacity(2 * n_samples);
    for (b, rows) in blocks(n_samples) {
        values.extend(pair_block(&table, seed, b, rows));
    }
    IndicatorMatrix::from_rows(values, 2)
}

pub fn sample_ensemble(
    spec: &CommonShockSpec,
    n_samples: usize,
    seed: u64,
) -> Result<IndicatorMatrix> {
    check_samples(n_samples)?;
    let mut values = Vec::with_capacity(spec.n_members * n_samples);
    for (b, rows) in blocks(n_samples) {
        values.extend(ensemble_block(spec, seed, b, rows));
    }
    IndicatorMatrix::from_rows(values, spec.n_members)
}

/// Number of blocks a sample of `n_samples` rows is split into.
pub fn block_count(n_samples: usize) -> usize {
    n_samples.div_ceil(BLOCK_ROWS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form solution of the two calibration equations.
    fn closed_form(p: f64, rho: f64) -> (f64, f64) {
        let t = rho * p * (1.0 - p) + p * p;
        let theta = (t - p * p) / (1.0 - 2.0 * p + t);
        (theta, (p - theta) / (1.0 - theta))
    }

    #[test]
    fn calibration_examples() {
        assert_eq!(calibrate_common_shock(0.3, 0.0).unwrap(), (0.0, 0.3));
        let (theta, q) = calibrate_common_shock(0.1, 0.5).unwrap();
        // θ = 0.045 / 0.855, q = 0.05
        assert!((theta - 0.052_631_578_947_368_42).abs() < 1e-12, "{theta}");
        assert!((q - 0.05).abs() < 1e-12, "{q}");
        assert!((theta + (1.0 - theta) * q - 0.1).abs() < 1e-12);
        assert!((theta + (1.0 - theta) * q * q - (0.5 * 0.09 + 0.01)).abs() < 1e-12);
        assert!((implied_correlation(theta, q) - 0.5).abs() < 1e-10);

        let (theta, q) = calibrate_common_shock(0.2, 0.999_999).unwrap();
        assert!((theta - 0.2).abs() < 1e-5 && q < 1e-5);

        assert!(calibrate_common_shock(0.0, 0.1).is_err());
        assert!(calibrate_common_shock(0.1, 1.0).is_err());
        assert!(calibrate_common_shock(0.1, -0.1).is_err());
        assert!(CommonShockSpec::new(0.1, 0.1, 1).is_err());
    }

    #[test]
    fn deterministic_and_block_stable() {
        let spec = CommonShockSpec::new(0.1, 0.3, 4).unwrap();
        let a = sample_ensemble(&spec, BLOCK_ROWS + 17, 9).unwrap();
        let b = sample_ensemble(&spec, BLOCK_ROWS + 17, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&spec, BLOCK_ROWS + 17, 10).unwrap();
        assert_ne!(a, c);
        // a prefix of whole blocks is shared with a longer run
        let long = sample_ensemble(&spec, 3 * BLOCK_ROWS, 9).unwrap();
        assert_eq!(
            &long.values()[..4 * BLOCK_ROWS],
            &a.values()[..4 * BLOCK_ROWS]
        );
        let p = sample_pair(0.2, 0.3, -0.1, 1000, 5).unwrap();
        assert_eq!(p, sample_pair(0.2, 0.3, -0.1, 1000, 5).unwrap());
        assert!(sample_pair(0.2, 0.3, -0.1, 0, 5).is_err());
        assert!(sample_pair(0.01, 0.01, -0.5, 10, 5).is_err());
    }

    #[test]
    fn ensemble_extremes() {
        let spec = CommonShockSpec::new(0.2, 0.0, 3).unwrap();
        assert_eq!(spec.theta, 0.0);
        let m = sample_ensemble(&spec, 50_000, 1).unwrap();
        let ones = m.values().iter().filter(|&&v| v == 1).count() as f64 / 150_000.0;
        assert!((ones - 0.2).abs() < 4.0 * (0.16f64 / 150_000.0).sqrt());
    }

    proptest! {
        #[test]
        fn calibration_matches_closed_form(p in 1e-6..0.99f64, rho in 0.0..0.999f64) {
            let (theta, q) = calibrate_common_shock(p, rho).unwrap();
            let (t_ref, q_ref) = closed_form(p, rho);
            prop_assert!((theta - t_ref).abs() < 1e-11);
            prop_assert!((q - q_ref).abs() < 1e-10);
            prop_assert!((0.0..=p).contains(&theta) && (0.0..=p).contains(&q));
            prop_assert!((implied_correlation(theta, q) - rho).abs() < 1e-10);
        }
    }
}
