use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar argument fell outside the range where the formula is defined.
    #[error("{name} = {value} is out of range, expected {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Marginals and correlation imply a joint failure probability outside
    /// its Fréchet bounds.
    #[error("infeasible (p1, p2, rho) = ({p1}, {p2}, {rho}): joint failure probability {joint} not in [{lower}, {upper}]")]
    Infeasible {
        p1: f64,
        p2: f64,
        rho: f64,
        joint: f64,
        lower: f64,
        upper: f64,
    },

    #[error("column {column} has zero sample variance, correlation is undefined")]
    DegenerateVariance { column: usize },

    #[error(
        "2x2 table of columns {i} and {j} has a zero expected count; a larger sample is needed"
    )]
    ZeroExpectedCount { i: usize, j: usize },

    #[error("required count {0:e} exceeds the representable range (1e18)")]
    Overflow(f64),

    #[error("index {index} out of range for {len} {what}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("no root found while calibrating: {0}")]
    NoRoot(&'static str),
}

/// Check `lo < value < hi`.
pub(crate) fn open_interval(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value > lo && value < hi {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: open_expected(lo, hi),
        })
    }
}

fn open_expected(lo: f64, hi: f64) -> &'static str {
    if lo == 0.0 && hi == 1.0 {
        "a value in (0, 1)"
    } else if lo == -1.0 && hi == 1.0 {
        "a value in (-1, 1)"
    } else {
        "a value inside the open interval"
    }
}

pub(crate) fn probability(name: &'static str, value: f64) -> Result<f64> {
    open_interval(name, value, 0.0, 1.0)
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "a finite positive value",
        })
    }
}
