//! Probabilistic day-ahead electricity price forecasting.
//!
//! A multi-output network learns the conditional CDF of each hourly price on
//! a fixed grid of unconditional quantiles; the CDF is made monotone,
//! interpolated and inverted into 99 predictive quantiles. Naive and
//! quantile-regression benchmarks and CRPS / Diebold-Mariano evaluation live
//! alongside it.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix them to `f64`, which is what the data pipeline uses.

pub mod benchmarks;
pub mod cdftools;
pub mod dataio;
pub mod distloss;
pub mod distnet;
pub mod evaluate;
pub mod linalg;
pub mod scalar;
pub mod stats;
pub mod transform;

pub use scalar::Scalar;

pub type TransformState = transform::TransformState<f64>;
pub type NetParams = distnet::NetParams<f64>;
pub type NetParams32 = distnet::NetParams<f32>;
pub type OptimizerState = distnet::OptimizerState<f64>;
pub type LossBreakdown = distloss::LossBreakdown<f64>;
