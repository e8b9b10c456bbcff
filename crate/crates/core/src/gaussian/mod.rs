//! One-dimensional Gaussian algebra and the truncated-Gaussian correction
//! functions consumed by the TrueSkill-style updates.
//!
//! Beliefs are stored in natural parameters (precision `pi`, precision-adjusted
//! mean `tau`) so that message products and quotients are exact and the
//! uninformative message (`pi = 0`) is representable.

mod normal;
mod truncated;

pub use normal::{mills_ratio, std_normal_cdf, std_normal_inv_cdf, std_normal_pdf};
pub use truncated::{truncated_std_normal_moments, v_draw, v_win, w_draw, w_win, TAIL_CROSSOVER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("division would yield negative precision ({0})")]
    NegativePrecision(f64),
    #[error("variance must be positive or +inf, got {0}")]
    InvalidVariance(f64),
    #[error("draw margin degenerate: interval mass is zero (t = {t}, eps = {eps})")]
    DegenerateMargin { t: f64, eps: f64 },
    #[error("argument outside the domain of {func}: {value}")]
    DomainError { func: &'static str, value: f64 },
}

/// A Gaussian belief N(mean, variance) held in natural parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pi: f64,
    tau: f64,
}

impl Gaussian1D {
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self, GaussianError> {
        if variance == f64::INFINITY {
            return Ok(Self::uninformative());
        }
        if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(GaussianError::InvalidVariance(variance));
        }
        let pi = 1.0 / variance;
        Ok(Self { pi, tau: mean * pi })
    }

    pub fn from_natural(pi: f64, tau: f64) -> Result<Self, GaussianError> {
        if !(pi >= 0.0 && pi.is_finite() && tau.is_finite()) {
            return Err(GaussianError::NegativePrecision(pi));
        }
        Ok(Self { pi, tau })
    }

    /// The identity of [`multiply`](Self::multiply): precision zero.
    pub const fn uninformative() -> Self {
        Self { pi: 0.0, tau: 0.0 }
    }

    pub fn is_uninformative(&self) -> bool {
        self.pi == 0.0
    }

    pub fn precision(&self) -> f64 {
        self.pi
    }

    pub fn precision_mean(&self) -> f64 {
        self.tau
    }

    /// Mean of the belief; the uninformative message reports 0.
    pub fn mean(&self) -> f64 {
        if self.pi == 0.0 {
            0.0
        } else {
            self.tau / self.pi
        }
    }

    pub fn variance(&self) -> f64 {
        if self.pi == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.pi
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn multiply(&self, other: &Self) -> Self {
        Self {
            pi: self.pi + other.pi,
            tau: self.tau + other.tau,
        }
    }

    /// Quotient used for EP cavities. Fails if the result would carry negative
    /// precision.
    pub fn divide(&self, other: &Self) -> Result<Self, GaussianError> {
        if self.pi < other.pi {
            return Err(GaussianError::NegativePrecision(self.pi - other.pi));
        }
        let pi = self.pi - other.pi;
        // exact self-division yields the uninformative message
        let tau = if pi == 0.0 { 0.0 } else { self.tau - other.tau };
        Ok(Self { pi, tau })
    }
}

impl std::ops::Mul for Gaussian1D {
    type Output = Gaussian1D;

    fn mul(self, rhs: Self) -> Self::Output {
        self.multiply(&rhs)
    }
}
