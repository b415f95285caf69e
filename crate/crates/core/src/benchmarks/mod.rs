//! Benchmark forecasters: naive point and distributional forecasts, the
//! LASSO-estimated autoregressive point model, and quantile-regression
//! averaging of its point forecasts.

pub mod lasso;
pub mod lear;
pub mod naive;
pub mod qr;
pub mod qra;

use chrono::NaiveDate;
use thiserror::Error;

pub use lasso::{lasso_fit, lear_fit, LassoCv, LassoFit};
pub use lear::{lear_features, lear_forecast, lear_point_forecasts, PointForecastSet, DEFAULT_LEAR_WINDOWS};
pub use naive::{naive_b_forecast, naive_errors, naive_normal_forecast, naive_point, NAIVE_B_DRAWS};
pub use qr::{check_loss, quantile_regression_fit, QrFit};
pub use qra::{qra_forecast, qrm_forecast};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{rows} rows, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("design has no non-constant column")]
    RankZero,
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("degenerate vertex with {zeros} zero residuals")]
    Degenerate { zeros: usize },
    #[error("level {0} outside (0, 1)")]
    BadLevel(f64),
    #[error("non-finite input")]
    NonFinite,
    #[error("day index {day} needs {needed} earlier days")]
    InsufficientHistory { day: usize, needed: usize },
    #[error("no point forecast for {date} hour {hour}")]
    MissingPoint { date: NaiveDate, hour: usize },
    #[error("point forecast file: {0}")]
    Format(String),
    #[error("{model} on {date} hour {hour}{}: {source}", window.map(|w| format!(" window {w}")).unwrap_or_default())]
    Context {
        model: String,
        date: NaiveDate,
        hour: usize,
        window: Option<usize>,
        #[source]
        source: Box<BenchError>,
    },
    #[error(transparent)]
    Transform(#[from] crate::transform::TransformError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn context(self, model: &str, date: NaiveDate, hour: usize, window: Option<usize>) -> Self {
        BenchError::Context { model: model.to_string(), date, hour, window, source: Box::new(self) }
    }
}
