use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetConfig;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    /// `out x in`
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer<T> {
    pub dense: Dense<T>,
    pub norm: Option<BatchNorm<T>>,
}

/// Weights, biases and batch-norm state of a network.
///
/// The same type doubles as the gradient container; running statistics are
/// ignored there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams<T> {
    pub hidden: Vec<HiddenLayer<T>>,
    pub output: Dense<T>,
}

fn dense_init<T: Scalar>(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Dense<T> {
    // LeCun uniform: U(-sqrt(3/fan_in), sqrt(3/fan_in)), unit-variance preactivations.
    let limit = (3.0 / inp as f64).sqrt();
    let weight = Array2::from_shape_simple_fn((out, inp), || T::lit(rng.random_range(-limit..limit)));
    Dense { weight, bias: Array1::zeros(out) }
}

impl<T: Scalar> NetParams<T> {
    /// Deterministic initialization: fan-in scaled uniform weights, zero biases,
    /// batch-norm scale 1 and shift 0, running variance 1.
    pub fn init(config: &NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = config.input_dim;
        let mut hidden = Vec::with_capacity(config.hidden_sizes.len());
        for &units in &config.hidden_sizes {
            let dense = dense_init(units, fan_in, &mut rng);
            let norm = config.batch_norm.then(|| BatchNorm {
                gamma: Array1::ones(units),
                beta: Array1::zeros(units),
                running_mean: Array1::zeros(units),
                running_var: Array1::ones(units),
            });
            hidden.push(HiddenLayer { dense, norm });
            fan_in = units;
        }
        let output = dense_init(config.output_dim, fan_in, &mut rng);
        Self { hidden, output }
    }

    /// All-zero container with the same shapes.
    pub fn zeros_like(&self) -> Self {
        let z1 = |a: &Array1<T>| Array1::zeros(a.len());
        let z2 = |a: &Array2<T>| Array2::zeros(a.dim());
        let dense = |d: &Dense<T>| Dense { weight: z2(&d.weight), bias: z1(&d.bias) };
        Self {
            hidden: self
                .hidden
                .iter()
                .map(|l| HiddenLayer {
                    dense: dense(&l.dense),
                    norm: l.norm.as_ref().map(|n| BatchNorm {
                        gamma: z1(&n.gamma),
                        beta: z1(&n.beta),
                        running_mean: z1(&n.running_mean),
                        running_var: z1(&n.running_var),
                    }),
                })
                .collect(),
            output: dense(&self.output),
        }
    }

    /// Trainable tensors in a fixed order, flagged with whether weight decay applies.
    pub fn trainable(&self) -> Vec<(&[T], bool)> {
        let mut out = Vec::new();
        for l in &self.hidden {
            out.push((l.dense.weight.as_slice().expect("contiguous"), true));
            out.push((l.dense.bias.as_slice().expect("contiguous"), false));
            if let Some(n) = &l.norm {
                out.push((n.gamma.as_slice().expect("contiguous"), false));
                out.push((n.beta.as_slice().expect("contiguous"), false));
            }
        }
        out.push((self.output.weight.as_slice().expect("contiguous"), true));
        out.push((self.output.bias.as_slice().expect("contiguous"), false));
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<(&mut [T], bool)> {
        let mut out = Vec::new();
        for l in &mut self.hidden {
            out.push((l.dense.weight.as_slice_mut().expect("contiguous"), true));
            out.push((l.dense.bias.as_slice_mut().expect("contiguous"), false));
            if let Some(n) = &mut l.norm {
                out.push((n.gamma.as_slice_mut().expect("contiguous"), false));
                out.push((n.beta.as_slice_mut().expect("contiguous"), false));
            }
        }
        out.push((self.output.weight.as_slice_mut().expect("contiguous"), true));
        out.push((self.output.bias.as_slice_mut().expect("contiguous"), false));
        out
    }

    pub fn num_trainable(&self) -> usize {
        self.trainable().iter().map(|(s, _)| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.trainable().iter().all(|(s, _)| s.iter().all(|v| v.is_finite()))
            && self.hidden.iter().all(|l| {
                l.norm
                    .as_ref()
                    .is_none_or(|n| n.running_mean.iter().chain(n.running_var.iter()).all(|v| v.is_finite()))
            })
    }
}
