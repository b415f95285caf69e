use std::path::PathBuf;

use pricedist_core::benchmarks::BenchError;
use pricedist_core::cdftools::CdfError;
use pricedist_core::dataio::DataError;
use pricedist_core::distnet::NetError;
use pricedist_core::evaluate::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cdf(#[from] CdfError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("interrupted after {0} days")]
    Interrupted(usize),
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for bad input
    /// data, 4 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Toml(_) => 2,
            HarnessError::Data(_) | HarnessError::Eval(_) | HarnessError::Cdf(CdfError::Csv(_) | CdfError::Io(_) | CdfError::Format(_) | CdfError::NonMonotone { .. }) => 3,
            HarnessError::Cdf(_) | HarnessError::Net(_) | HarnessError::Bench(_) | HarnessError::Numeric(_) => 4,
            HarnessError::Io { .. } | HarnessError::Json(_) | HarnessError::Interrupted(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}
