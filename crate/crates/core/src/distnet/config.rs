use serde::{Deserialize, Serialize};

use super::NetError;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    /// Softmax across the units of the layer.
    Softmax,
    Elu,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softmax,
        Activation::Elu,
        Activation::Softplus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Elu => "elu",
            Activation::Softplus => "softplus",
        }
    }
}

/// Architecture and training hyperparameters of one network.
///
/// The output layer always has a sigmoid activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub output_dim: usize,
    /// Dropout rate applied after every hidden activation.
    pub dropout: f64,
    pub learning_rate: f64,
    /// Decoupled weight decay; applied to weight matrices only.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub lambda_m: f64,
    /// Standard deviation of the Gaussian noise added to training inputs.
    pub noise_sd: f64,
    #[serde(default = "default_true")]
    pub batch_norm: bool,
}

fn default_true() -> bool {
    true
}

impl NetConfig {
    /// Two hidden layers with the fixed training constants used in production runs
    /// (1500 epochs, patience 100, monotonicity weight 1.5, input noise 0.1).
    pub fn standard(input_dim: usize, hidden: (usize, usize), activations: (Activation, Activation)) -> Self {
        Self {
            input_dim,
            hidden_sizes: vec![hidden.0, hidden.1],
            activations: vec![activations.0, activations.1],
            output_dim: 31,
            dropout: 0.2,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 32,
            max_epochs: 1500,
            patience: 100,
            lambda_m: 1.5,
            noise_sd: 0.1,
            batch_norm: true,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: String| Err(NetError::Config(msg));
        if self.input_dim == 0 || self.output_dim < 2 {
            return bad(format!("input_dim {} / output_dim {} too small", self.input_dim, self.output_dim));
        }
        if self.hidden_sizes.len() != self.activations.len() {
            return bad(format!(
                "{} hidden sizes but {} activations",
                self.hidden_sizes.len(),
                self.activations.len()
            ));
        }
        if self.hidden_sizes.iter().any(|&s| s == 0) {
            return bad("hidden layer with zero units".into());
        }
        if !(0.0..=0.5).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 0.5]", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0) || !(self.lambda_m >= 0.0) || !(self.noise_sd >= 0.0) {
            return bad("weight_decay, lambda_m and noise_sd must be non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }
}
