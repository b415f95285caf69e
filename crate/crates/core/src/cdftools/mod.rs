//! Probability levels, unconditional-quantile support tables, indicator
//! targets, monotone CDF interpolation and inversion, and ensemble averaging.

mod interp;
mod invert;
mod io;

use ndarray::{Array3, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;
use crate::Scalar;

pub use interp::{monotone_cubic, MonotoneCubic};
pub use invert::{cdf_to_price_quantiles, cdf_to_quantiles, repair_probabilities, CdfCurve, DEFAULT_GRID_POINTS, REPAIR_SPACING};
pub use io::{read_quantile_csv, write_quantile_csv, QuantileForecast};

/// Number of CDF levels predicted by the network.
pub const TARGET_LEVELS: usize = 31;
/// Number of quantile levels in every emitted forecast.
pub const FORECAST_LEVELS: usize = 99;

#[derive(Debug, Error)]
pub enum CdfError {
    #[error("hour {hour}: {got} observations, need at least {needed}")]
    TooFewObservations { hour: usize, got: usize, needed: usize },
    #[error("knots must be strictly increasing: {what} at index {index}")]
    NonIncreasingKnots { what: &'static str, index: usize },
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("length mismatch: {what} has {got}, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
    #[error("tail anchor {anchor} lies inside the support [{lo}, {hi}]")]
    AnchorInsideSupport { anchor: f64, lo: f64, hi: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("level {level} is outside (0, 1)")]
    BadLevel { level: f64 },
    #[error("quantile file: {0}")]
    Format(String),
    #[error("{date} hour {hour}: quantile at level {alpha} decreases")]
    NonMonotone { date: chrono::NaiveDate, hour: usize, alpha: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `k` equidistant levels from 0.01 to 0.99 inclusive.
pub fn levels(k: usize) -> Vec<f64> {
    assert!(k >= 2, "need at least two levels");
    (0..k).map(|j| 0.01 + j as f64 * 0.98 / (k - 1) as f64).collect()
}

/// The 31 network levels.
pub fn target_levels() -> Vec<f64> {
    levels(TARGET_LEVELS)
}

/// The 99 forecast levels 0.01, 0.02, ..., 0.99.
pub fn forecast_levels() -> Vec<f64> {
    (1..=FORECAST_LEVELS).map(|i| i as f64 / 100.0).collect()
}

/// Per-hour support values `q[hour][j]` at `levels[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub levels: Vec<f64>,
    pub per_hour: Vec<Vec<f64>>,
}

impl QuantileTable {
    pub fn hours(&self) -> usize {
        self.per_hour.len()
    }

    pub fn support(&self, hour: usize) -> &[f64] {
        &self.per_hour[hour]
    }

    /// Indicator vector `1{price <= q_j}` for one hour.
    pub fn indicators(&self, hour: usize, price: f64) -> Vec<f64> {
        self.per_hour[hour].iter().map(|&q| if price <= q { 1.0 } else { 0.0 }).collect()
    }
}

/// Interpolated empirical quantiles of each hour's training prices.
pub fn unconditional_quantiles(per_hour: &[Vec<f64>], levels: &[f64]) -> Result<QuantileTable, CdfError> {
    let needed = levels.len();
    let mut table = Vec::with_capacity(per_hour.len());
    for (hour, prices) in per_hour.iter().enumerate() {
        if prices.len() < needed {
            return Err(CdfError::TooFewObservations { hour, got: prices.len(), needed });
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(CdfError::NonFinite("training prices"));
        }
        let q = stats::quantiles(prices, levels);
        table.push(q);
    }
    Ok(QuantileTable { levels: levels.to_vec(), per_hour: table })
}

/// Binary targets `(day, hour, j) = 1{p[day, hour] <= q[hour][j]}`.
pub fn target_indicators(prices: ArrayView2<f64>, table: &QuantileTable) -> Result<Array3<f64>, CdfError> {
    if prices.ncols() != table.hours() {
        return Err(CdfError::Length { what: "price hours", got: prices.ncols(), expected: table.hours() });
    }
    let k = table.levels.len();
    Ok(Array3::from_shape_fn((prices.nrows(), prices.ncols(), k), |(t, h, j)| {
        if prices[[t, h]] <= table.per_hour[h][j] {
            1.0
        } else {
            0.0
        }
    }))
}

/// Indices of the `ceil(n/2)` members with the smallest validation loss,
/// ascending by loss; ties keep member order.
pub fn top_half(val_losses: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..val_losses.len()).collect();
    idx.sort_by(|&a, &b| val_losses[a].total_cmp(&val_losses[b]));
    idx.truncate(val_losses.len().div_ceil(2));
    idx
}

/// Per-level arithmetic mean of equally weighted members.
pub fn quantile_average<T: Scalar>(forecasts: &[Vec<T>]) -> Result<Vec<T>, CdfError> {
    let first = forecasts.first().ok_or(CdfError::EmptyEnsemble)?;
    let len = first.len();
    if let Some(bad) = forecasts.iter().find(|f| f.len() != len) {
        return Err(CdfError::Length { what: "ensemble member", got: bad.len(), expected: len });
    }
    let n = T::from_usize_lossy(forecasts.len());
    Ok((0..len).map(|a| forecasts.iter().map(|f| f[a]).sum::<T>() / n).collect())
}

/// Per-level mean of the better half of the members.
pub fn ensemble_average<T: Scalar>(forecasts: &[Vec<T>], val_losses: &[f64]) -> Result<Vec<T>, CdfError> {
    if forecasts.is_empty() {
        return Err(CdfError::EmptyEnsemble);
    }
    if val_losses.len() != forecasts.len() {
        return Err(CdfError::Length { what: "validation losses", got: val_losses.len(), expected: forecasts.len() });
    }
    let kept: Vec<Vec<T>> = top_half(val_losses).into_iter().map(|m| forecasts[m].clone()).collect();
    quantile_average(&kept)
}
