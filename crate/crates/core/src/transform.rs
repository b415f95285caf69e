//! Variance-stabilizing asinh transform of median/MAD-standardized prices.
//!
//! Prices are standardized as `u = (p - median) / mad_scaled`, where
//! `mad_scaled` is the median absolute deviation divided by the 75% quantile
//! of the standard normal distribution, and then mapped through
//! `asinh(u) = log(u + sqrt(u^2 + 1))`. The map is strictly increasing, so
//! quantiles commute with it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;
use crate::Scalar;

/// 75% quantile of the standard normal distribution.
pub const NORMAL_Q75: f64 = 0.674489750196082;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("transform window is empty")]
    Empty,
    #[error("degenerate scale: median absolute deviation is zero (median {median})")]
    DegenerateScale { median: f64 },
    #[error("non-finite price in transform window at position {0}")]
    NonFinite(usize),
}

/// Location and scale fitted on one in-sample window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformState<T> {
    pub median: T,
    pub mad_scaled: T,
}

impl<T: Scalar> TransformState<T> {
    /// Fits median and scaled MAD on the supplied window.
    pub fn fit(prices: &[T]) -> Result<Self, TransformError> {
        if prices.is_empty() {
            return Err(TransformError::Empty);
        }
        if let Some(i) = prices.iter().position(|p| !p.is_finite()) {
            return Err(TransformError::NonFinite(i));
        }
        let median = stats::median(prices);
        let dev: Vec<T> = prices.iter().map(|&p| (p - median).abs()).collect();
        let mad = stats::median(&dev);
        if !(mad > T::zero()) {
            return Err(TransformError::DegenerateScale { median: median.as_f64() });
        }
        Ok(Self { median, mad_scaled: mad / T::lit(NORMAL_Q75) })
    }

    #[inline]
    pub fn standardize(&self, p: T) -> T {
        (p - self.median) / self.mad_scaled
    }

    /// Price to transformed space.
    #[inline]
    pub fn forward(&self, p: T) -> T {
        // `asinh` is the cancellation-free form of log(u + sqrt(u^2 + 1)).
        self.standardize(p).asinh()
    }

    /// Transformed value back to price space.
    #[inline]
    pub fn inverse(&self, y: T) -> T {
        self.median + self.mad_scaled * y.sinh()
    }

    pub fn forward_all(&self, prices: &[T]) -> Vec<T> {
        prices.iter().map(|&p| self.forward(p)).collect()
    }

    pub fn inverse_all(&self, ys: &[T]) -> Vec<T> {
        ys.iter().map(|&y| self.inverse(y)).collect()
    }
}

pub fn fit_transform_state<T: Scalar>(prices: &[T]) -> Result<TransformState<T>, TransformError> {
    TransformState::fit(prices)
}

pub fn asinh_forward<T: Scalar>(state: &TransformState<T>, p: T) -> T {
    state.forward(p)
}

pub fn asinh_inverse<T: Scalar>(state: &TransformState<T>, y: T) -> T {
    state.inverse(y)
}
