//! Orchestration for pricedist: hyperparameter search, rolling backtests,
//! benchmark runs, evaluation reports and the `pricedist` command line.

pub mod bench;
pub mod config;
mod error;
pub mod hpo;
pub mod manifest;
pub mod pipeline;
pub mod rolling;
pub mod seeds;
pub mod synth;

pub use config::RunConfig;
pub use error::HarnessError;
