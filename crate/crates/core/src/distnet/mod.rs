//! Multi-output feedforward network mapping a feature vector to `k` CDF
//! values, trained with AdamW on the BCE + monotonicity objective.

mod config;
pub mod net;
pub mod optim;
mod params;
pub mod train;

use thiserror::Error;

pub use config::{Activation, NetConfig};
pub use net::{backward, forward, loss_and_gradients, predict, ForwardPass, Mode};
pub use optim::{adamw_step, OptimizerState};
pub use params::{BatchNorm, Dense, HiddenLayer, NetParams};
pub use train::{fit, split_indices, train, update, Dataset, TrainOutcome};

use crate::distloss::LossError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("input has {got} columns, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("non-finite activations in layer {layer}")]
    NonFinite { layer: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("insufficient data: {rows} rows, need at least {needed}")]
    InsufficientData { rows: usize, needed: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
}
