use serde::{Deserialize, Serialize};

use super::NetParams;
use crate::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// AdamW moment accumulators, laid out in [`NetParams::trainable`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &NetParams<T>) -> Self {
        let shapes: Vec<usize> = params.trainable().iter().map(|(s, _)| s.len()).collect();
        Self {
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            eps: T::lit(ADAM_EPS),
            step: 0,
            first: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }
}

/// One AdamW update with decoupled weight decay:
///
/// ```text
/// theta <- theta (1 - lr wd)                     (weights only)
/// theta <- theta - lr m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adamw_step<T: Scalar>(
    state: &mut OptimizerState<T>,
    params: &mut NetParams<T>,
    grads: &NetParams<T>,
    lr: T,
    weight_decay: T,
) {
    state.step += 1;
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    let decay = T::one() - lr * weight_decay;
    let grads = grads.trainable();
    for (((theta, decays), g), (m, v)) in params
        .trainable_mut()
        .into_iter()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let g = g.0;
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            if decays {
                theta[i] *= decay;
            }
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
