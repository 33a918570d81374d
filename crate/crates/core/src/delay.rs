//! Conversion-delay distributions over the nonnegative integers.
//!
//! `cdf(d) = P(D <= d)` is the probability that a conversion triggered by a
//! pull has been disclosed `d` rounds later.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Delay returned by [`DelayDistribution::sample`] for conversions that
/// fall in the tail mass of a tabulated distribution and never disclose.
pub const NEVER: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("geometric mean delay must be finite and positive, got {0}")]
    InvalidMean(f64),
    #[error("tabulated cdf must be non-empty")]
    EmptyTable,
    #[error("tabulated cdf entry {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("tabulated cdf decreases at index {index}")]
    Decreasing { index: usize },
    #[error("tail survival {tail} is inconsistent with the last table entry {last}")]
    InvalidTail { tail: f64, last: f64 },
    #[error("delay distribution has infinite mean (tail survival {0} beyond the table)")]
    InfiniteMean(f64),
}

/// Serialized form, e.g. `{"geometric": {"mean": 500}}` or
/// `{"tabulated": {"cdf": [0.2, 0.5, 1.0]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Geometric {
        mean: f64,
    },
    Tabulated {
        cdf: Vec<f64>,
        #[serde(default)]
        tail_survival: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayDistribution {
    /// Survival `1 - cdf(d) = decay^(d+1)` with `decay = mean / (1 + mean)`.
    Geometric { mean: f64, decay: f64, ln_decay: f64 },
    /// Explicit `cdf(0..len)`; beyond the table the survival stays at
    /// `tail_survival`.
    Tabulated { cdf: Vec<f64>, tail_survival: f64 },
}

impl DelayDistribution {
    pub fn geometric(mean: f64) -> Result<Self, DelayError> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(DelayError::InvalidMean(mean));
        }
        let ln_decay = -(1.0 / mean).ln_1p();
        Ok(Self::Geometric { mean, decay: mean / (1.0 + mean), ln_decay })
    }

    /// Tabulated cdf with zero survival beyond the table.
    pub fn tabulated(cdf: Vec<f64>) -> Result<Self, DelayError> {
        Self::tabulated_with_tail(cdf, 0.0)
    }

    pub fn tabulated_with_tail(cdf: Vec<f64>, tail_survival: f64) -> Result<Self, DelayError> {
        let Some(&last) = cdf.last() else {
            return Err(DelayError::EmptyTable);
        };
        for (index, &value) in cdf.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(DelayError::OutOfRange { index, value });
            }
            if index > 0 && value < cdf[index - 1] {
                return Err(DelayError::Decreasing { index });
            }
        }
        // tolerance for tables written in decimal, e.g. last 0.9 with tail 0.1
        if !(0.0..=1.0 - last + 1e-12).contains(&tail_survival) {
            return Err(DelayError::InvalidTail { tail: tail_survival, last });
        }
        Ok(Self::Tabulated { cdf, tail_survival })
    }

    /// Point mass at `delay`.
    pub fn constant(delay: usize) -> Self {
        let mut cdf = vec![0.0; delay + 1];
        cdf[delay] = 1.0;
        Self::Tabulated { cdf, tail_survival: 0.0 }
    }

    pub fn from_spec(spec: &DelaySpec) -> Result<Self, DelayError> {
        match spec {
            DelaySpec::Geometric { mean } => Self::geometric(*mean),
            DelaySpec::Tabulated { cdf, tail_survival } => Self::tabulated_with_tail(cdf.clone(), *tail_survival),
        }
    }

    pub fn to_spec(&self) -> DelaySpec {
        match self {
            Self::Geometric { mean, .. } => DelaySpec::Geometric { mean: *mean },
            Self::Tabulated { cdf, tail_survival } => {
                DelaySpec::Tabulated { cdf: cdf.clone(), tail_survival: *tail_survival }
            }
        }
    }

    /// Per-step survival decay for geometric delays.
    pub fn decay(&self) -> Option<f64> {
        match self {
            Self::Geometric { decay, .. } => Some(*decay),
            Self::Tabulated { .. } => None,
        }
    }

    pub fn cdf(&self, d: u64) -> f64 {
        match self {
            Self::Geometric { ln_decay, .. } => -((d as f64 + 1.0) * ln_decay).exp_m1(),
            Self::Tabulated { cdf, tail_survival } => {
                usize::try_from(d).ok().and_then(|i| cdf.get(i).copied()).unwrap_or(1.0 - tail_survival)
            }
        }
    }

    pub fn survival(&self, d: u64) -> f64 {
        1.0 - self.cdf(d)
    }

    /// Expected delay; errors when survival mass escapes to infinity.
    pub fn mean(&self) -> Result<f64, DelayError> {
        match self {
            Self::Geometric { mean, .. } => Ok(*mean),
            Self::Tabulated { tail_survival, .. } if *tail_survival > 0.0 => {
                Err(DelayError::InfiniteMean(*tail_survival))
            }
            Self::Tabulated { cdf, .. } => Ok(cdf.iter().map(|p| 1.0 - p).sum()),
        }
    }

    /// Smallest `d` beyond which `cdf` is constant, if there is one.
    pub fn support_len(&self) -> Option<u64> {
        match self {
            Self::Geometric { .. } => None,
            Self::Tabulated { cdf, .. } => Some(cdf.len() as u64 - 1),
        }
    }

    /// `[cdf(0), ..., cdf(len - 1)]`.
    pub fn cdf_table(&self, len: usize) -> Vec<f64> {
        (0..len as u64).map(|d| self.cdf(d)).collect()
    }

    /// Inverse-cdf sample. Tail mass of a tabulated distribution yields [`NEVER`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Geometric { ln_decay, .. } => {
                // u in (0, 1]; P(floor(ln u / ln decay) >= d) = decay^d
                let u = 1.0 - rng.gen::<f64>();
                (u.ln() / ln_decay).floor() as u64
            }
            Self::Tabulated { cdf, .. } => {
                let u = rng.gen::<f64>();
                cdf.iter().position(|&p| u < p).map_or(NEVER, |d| d as u64)
            }
        }
    }
}
