//! Sample sizes for demonstrating a rare failure rate, and the frame and
//! labeling-cost pipeline for a direct test campaign.

use serde::{Deserialize, Serialize};

use crate::error::{positive, probability, Error, Result};
use crate::special::LogSumExp;

/// Largest sample size returned as an exact count.
pub const MAX_COUNT: f64 = 1e18;

/// Leverage factor `−ln α` for the zero-failure case.
pub fn statistical_factor(alpha: f64) -> Result<f64> {
    let alpha = probability("alpha", alpha)?;
    Ok(-libm::log(alpha))
}

/// Outcome of the exact one-sided binomial test of `H1: p < p_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDecision {
    pub accept_h1: bool,
    /// `P(N > n_obs)` for `N ~ B(n_test, p_tol)`.
    pub attained_confidence: f64,
    pub p_tol: f64,
    pub alpha: f64,
    pub n_test: u64,
    pub n_obs: u64,
}

/// `ln P(N ≤ k)` for `N ~ B(n, p)`, summed in log space.
///
/// Term ratios are accumulated incrementally, so the cost is `O(k)` and
/// independent of `n`; `n` may be as large as 10¹⁸.
pub fn log_binomial_cdf(n: u64, k: u64, p: f64) -> f64 {
    let k = k.min(n);
    let ln_q = libm::log1p(-p);
    let log_odds = libm::log(p) - ln_q;
    let mut term = n as f64 * ln_q;
    if k == 0 {
        return term;
    }
    let mut acc = LogSumExp::new();
    acc.push(term);
    for j in 0..k {
        term += libm::log((n - j) as f64 / (j + 1) as f64) + log_odds;
        acc.push(term);
    }
    acc.value().min(0.0)
}

/// `ln P(N > k)` for `N ~ B(n, p)`, summed downwards from `j = n` in
/// `O(n − k)` steps.
pub fn log_binomial_sf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n {
        return f64::NEG_INFINITY;
    }
    let log_odds = libm::log(p) - libm::log1p(-p);
    let mut term = n as f64 * libm::log(p);
    let mut acc = LogSumExp::new();
    acc.push(term);
    for j in (k + 2..=n).rev() {
        term += libm::log(j as f64 / (n - j + 1) as f64) - log_odds;
        acc.push(term);
    }
    acc.value().min(0.0)
}

pub fn binomial_test(n_test: u64, n_obs: u64, p_tol: f64, alpha: f64) -> Result<EvidenceDecision> {
    let p_tol = probability("p_tol", p_tol)?;
    let alpha = probability("alpha", alpha)?;
    if n_obs > n_test {
        return Err(Error::Domain {
            name: "n_obs",
            value: n_obs as f64,
            expected: "at most n_test observed failures",
        });
    }
    // sum whichever tail has fewer terms; the other follows by complement
    let (log_cdf, attained_confidence) = if n_obs == n_test {
        (0.0, 0.0)
    } else if n_test - n_obs <= n_obs {
        let log_sf = log_binomial_sf(n_test, n_obs, p_tol);
        (libm::log1p(-libm::exp(log_sf)), libm::exp(log_sf))
    } else {
        let log_cdf = log_binomial_cdf(n_test, n_obs, p_tol);
        (log_cdf, -libm::expm1(log_cdf))
    };
    // P(N ≤ n_obs) ≤ α  ⇔  P(N > n_obs) ≥ 1 − α, compared on the log scale
    let accept_h1 = n_obs < n_test && log_cdf <= libm::log(alpha);
    Ok(EvidenceDecision {
        accept_h1,
        attained_confidence,
        p_tol,
        alpha,
        n_test,
        n_obs,
    })
}

/// Smallest `N` with `(1 − p_tol)^N ≤ α`, i.e. the number of failure-free
/// trials after which [`binomial_test`] accepts.
pub fn zero_failure_sample_size(p_tol: f64, alpha: f64) -> Result<u64> {
    let p_tol = probability("p_tol", p_tol)?;
    let alpha = probability("alpha", alpha)?;
    let ln_q = libm::log1p(-p_tol);
    let ln_alpha = libm::log(alpha);
    let estimate = libm::ceil(ln_alpha / ln_q);
    if !(estimate <= MAX_COUNT) {
        return Err(Error::Overflow(estimate));
    }
    // pin the boundary to the exact predicate used by `binomial_test`
    let accepts = |n: u64| n as f64 * ln_q <= ln_alpha;
    let mut n = (estimate as u64).max(1);
    while !accepts(n) {
        n += 1;
    }
    while n > 1 && accepts(n - 1) {
        n -= 1;
    }
    Ok(n)
}

/// Rate-based (Poisson) counterpart `−ln α / p_tol`, for cross-checking.
pub fn poisson_sample_size(p_tol: f64, alpha: f64) -> Result<f64> {
    let p_tol = probability("p_tol", p_tol)?;
    Ok(statistical_factor(alpha)? / p_tol)
}

/// Inputs of the direct-testing campaign estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignAssumptions {
    pub meters_per_fatality: f64,
    pub meters_per_frame: f64,
    pub alpha: f64,
    /// How much safer than a human driver the vehicle must be.
    pub robot_safety_factor: f64,
    /// Share of the acceptable risk reserved for perception failures.
    pub perception_risk_fraction: f64,
    pub minutes_per_frame_label: f64,
    pub hourly_wage: f64,
}

impl CampaignAssumptions {
    /// Lower-bound column of the published campaign table.
    pub const TABLE_LOWER: Self = Self {
        meters_per_fatality: 2.5e11,
        meters_per_frame: 10.0,
        alpha: 0.05,
        robot_safety_factor: 10.0,
        perception_risk_fraction: 0.5,
        minutes_per_frame_label: 5.0,
        hourly_wage: 9.19,
    };

    /// Upper-bound column of the published campaign table.
    pub const TABLE_UPPER: Self = Self {
        meters_per_fatality: 2.5e12,
        meters_per_frame: 1.0,
        alpha: 1e-4,
        robot_safety_factor: 100.0,
        perception_risk_fraction: 0.1,
        minutes_per_frame_label: 90.0,
        hourly_wage: 15.0,
    };

    pub fn validate(&self) -> Result<()> {
        positive("meters_per_fatality", self.meters_per_fatality)?;
        positive("meters_per_frame", self.meters_per_frame)?;
        probability("alpha", self.alpha)?;
        if !(self.robot_safety_factor >= 1.0 && self.robot_safety_factor.is_finite()) {
            return Err(Error::Domain {
                name: "robot_safety_factor",
                value: self.robot_safety_factor,
                expected: "a finite factor >= 1",
            });
        }
        let f = self.perception_risk_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Domain {
                name: "perception_risk_fraction",
                value: f,
                expected: "a value in (0, 1]",
            });
        }
        positive("minutes_per_frame_label", self.minutes_per_frame_label)?;
        positive("hourly_wage", self.hourly_wage)?;
        Ok(())
    }

    pub fn exact_cost_per_frame(&self) -> f64 {
        self.minutes_per_frame_label / 60.0 * self.hourly_wage
    }
}

/// Which per-frame labeling cost enters the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `minutes / 60 × wage`.
    #[default]
    Exact,
    /// Use the rounded per-frame figures printed in the published table
    /// (0.775 at 5 min and 9.19/h, 22.5 at 90 min and 15/h); any other
    /// labeling inputs fall back to the exact cost.
    Published,
}

const PUBLISHED_COST_PER_FRAME: [(f64, f64, f64); 2] = [(5.0, 9.19, 0.775), (90.0, 15.0, 22.5)];

fn published_cost(minutes: f64, wage: f64) -> Option<f64> {
    PUBLISHED_COST_PER_FRAME
        .iter()
        .find(|(m, w, _)| (m - minutes).abs() < 1e-9 && (w - wage).abs() < 1e-9)
        .map(|&(_, _, c)| c)
}

/// Frame counts after each stage of the campaign table, plus labeling cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementReport {
    /// Meters per fatality divided by meters per frame.
    pub base_frames: f64,
    pub statistical_factor: f64,
    pub frames_after_statistics: f64,
    pub frames_after_safety: f64,
    /// After dividing by the perception risk fraction.
    pub frames_final: f64,
    pub cost_per_frame_exact: f64,
    pub cost_per_frame: f64,
    pub cost_mode: CostMode,
    pub total_cost: f64,
}

pub fn frame_requirement(
    assumptions: &CampaignAssumptions,
    cost_mode: CostMode,
) -> Result<RequirementReport> {
    assumptions.validate()?;
    let a = assumptions;
    let factor = statistical_factor(a.alpha)?;
    let base_frames = a.meters_per_fatality / a.meters_per_frame;
    let frames_after_statistics = base_frames * factor;
    let frames_after_safety = frames_after_statistics * a.robot_safety_factor;
    let frames_final = frames_after_safety / a.perception_risk_fraction;
    let cost_per_frame_exact = a.exact_cost_per_frame();
    let cost_per_frame = match cost_mode {
        CostMode::Exact => cost_per_frame_exact,
        CostMode::Published => {
            published_cost(a.minutes_per_frame_label, a.hourly_wage).unwrap_or(cost_per_frame_exact)
        }
    };
    Ok(RequirementReport {
        base_frames,
        statistical_factor: factor,
        frames_after_statistics,
        frames_after_safety,
        frames_final,
        cost_per_frame_exact,
        cost_per_frame,
        cost_mode,
        total_cost: frames_final * cost_per_frame,
    })
}
