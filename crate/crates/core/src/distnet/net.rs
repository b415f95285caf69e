//! Forward pass and hand-derived backpropagation.
//!
//! Each hidden layer computes `affine -> batch norm -> activation -> dropout`;
//! the output layer is `affine -> sigmoid`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{Activation, NetConfig, NetError, NetParams};
use crate::distloss::{self, LossBreakdown};
use crate::Scalar;

/// Batch-norm epsilon added to the variance.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the current batch in running-statistic updates.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone)]
struct NormCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
    batch_mean: Array1<T>,
    batch_var: Array1<T>,
}

#[derive(Debug, Clone)]
struct HiddenCache<T> {
    input: Array2<T>,
    norm: Option<NormCache<T>>,
    /// Activation input (after normalization).
    pre_act: Array2<T>,
    /// Activation output before dropout.
    act: Array2<T>,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)).
    mask: Option<Array2<T>>,
}

/// Outputs of a forward pass plus everything backprop needs.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub mode: Mode,
    hidden: Vec<HiddenCache<T>>,
    output_input: Array2<T>,
    /// `batch x k` probabilities.
    pub probs: Array2<T>,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn activate<T: Scalar>(act: Activation, z: &Array2<T>) -> Array2<T> {
    match act {
        Activation::Relu => z.mapv(|v| v.max(T::zero())),
        Activation::Tanh => z.mapv(|v| v.tanh()),
        Activation::Sigmoid => z.mapv(sigmoid),
        Activation::Elu => z.mapv(|v| if v > T::zero() { v } else { v.exp_m1() }),
        Activation::Softplus => z.mapv(|v| v.max(T::zero()) + (-v.abs()).exp().ln_1p()),
        Activation::Softmax => {
            let mut out = z.clone();
            for mut row in out.outer_iter_mut() {
                let m = row.fold(T::neg_infinity(), |a, &b| a.max(b));
                row.mapv_inplace(|v| (v - m).exp());
                let s = row.sum();
                row.mapv_inplace(|v| v / s);
            }
            out
        }
    }
}

/// Gradient through the activation given its input `z`, output `a` and upstream `da`.
fn activate_backward<T: Scalar>(act: Activation, z: &Array2<T>, a: &Array2<T>, da: &Array2<T>) -> Array2<T> {
    match act {
        Activation::Relu => Zip::from(z).and(da).map_collect(|&z, &d| if z > T::zero() { d } else { T::zero() }),
        Activation::Tanh => Zip::from(a).and(da).map_collect(|&a, &d| d * (T::one() - a * a)),
        Activation::Sigmoid => Zip::from(a).and(da).map_collect(|&a, &d| d * a * (T::one() - a)),
        Activation::Elu => Zip::from(z).and(da).map_collect(|&z, &d| if z > T::zero() { d } else { d * z.exp() }),
        Activation::Softplus => Zip::from(z).and(da).map_collect(|&z, &d| d * sigmoid(z)),
        Activation::Softmax => {
            let mut out = Array2::zeros(a.dim());
            for ((mut o, s), g) in out.outer_iter_mut().zip(a.outer_iter()).zip(da.outer_iter()) {
                let dot = s.dot(&g);
                Zip::from(&mut o).and(&s).and(&g).for_each(|o, &s, &g| *o = s * (g - dot));
            }
            out
        }
    }
}

fn affine<T: Scalar>(x: &ArrayView2<T>, w: &Array2<T>, b: &Array1<T>) -> Array2<T> {
    let mut z = x.dot(&w.t());
    z += b;
    z
}

fn ensure_finite<T: Scalar>(a: &Array2<T>, layer: usize) -> Result<(), NetError> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NetError::NonFinite { layer })
    }
}

/// Runs the network on a `batch x input_dim` matrix.
///
/// In [`Mode::Train`] dropout masks are drawn from `rng` and batch norm uses
/// the batch statistics; running statistics are *not* updated here (see
/// [`NetParams::absorb_batch_stats`]).
pub fn forward<T: Scalar, R: Rng + ?Sized>(
    params: &NetParams<T>,
    config: &NetConfig,
    x: ArrayView2<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardPass<T>, NetError> {
    if x.ncols() != config.input_dim {
        return Err(NetError::InputDim { expected: config.input_dim, got: x.ncols() });
    }
    let eps = T::lit(BN_EPS);
    let rate = config.dropout;
    let keep_scale = T::lit(1.0 / (1.0 - rate));
    let mut hidden = Vec::with_capacity(params.hidden.len());
    let mut current = x.to_owned();
    for (li, (layer, &act_kind)) in params.hidden.iter().zip(&config.activations).enumerate() {
        let z = affine(&current.view(), &layer.dense.weight, &layer.dense.bias);
        let (pre_act, norm) = match &layer.norm {
            None => (z, None),
            Some(bn) => {
                let (mean, var) = match mode {
                    Mode::Train => {
                        let n = T::from_usize_lossy(z.nrows());
                        let mean = z.sum_axis(Axis(0)) / n;
                        let centered = &z - &mean;
                        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
                        (mean, var)
                    }
                    Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                };
                let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
                let xhat = (&z - &mean) * &inv_std;
                let out = &xhat * &bn.gamma + &bn.beta;
                (out, Some(NormCache { xhat, inv_std, batch_mean: mean, batch_var: var }))
            }
        };
        ensure_finite(&pre_act, li)?;
        let act = activate(act_kind, &pre_act);
        ensure_finite(&act, li)?;
        let (out, mask) = if mode == Mode::Train && rate > 0.0 {
            let mask = Array2::from_shape_simple_fn(act.dim(), || {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep_scale
                }
            });
            (&act * &mask, Some(mask))
        } else {
            (act.clone(), None)
        };
        hidden.push(HiddenCache { input: current, norm, pre_act, act, mask });
        current = out;
    }
    let z = affine(&current.view(), &params.output.weight, &params.output.bias);
    let probs = z.mapv(sigmoid);
    ensure_finite(&probs, params.hidden.len())?;
    Ok(ForwardPass { mode, hidden, output_input: current, probs })
}

/// Loss of a completed forward pass and gradients for every trainable tensor.
pub fn backward<T: Scalar>(
    params: &NetParams<T>,
    config: &NetConfig,
    pass: &ForwardPass<T>,
    targets: ArrayView2<T>,
) -> Result<(NetParams<T>, LossBreakdown<T>), NetError> {
    let lambda_m = T::lit(config.lambda_m);
    let loss = distloss::bce_monotone_loss(pass.probs.view(), targets, lambda_m)?;
    let dprobs = distloss::loss_gradient(pass.probs.view(), targets, lambda_m)?;
    let mut grads = params.zeros_like();

    // sigmoid'(z) = g (1 - g), with the unclamped network output.
    let mut dz = Zip::from(&dprobs).and(&pass.probs).map_collect(|&d, &g| d * g * (T::one() - g));
    grads.output.weight = dz.t().dot(&pass.output_input);
    grads.output.bias = dz.sum_axis(Axis(0));
    let mut dcurrent = dz.dot(&params.output.weight);

    for (li, cache) in pass.hidden.iter().enumerate().rev() {
        let layer = &params.hidden[li];
        let dact = match &cache.mask {
            Some(mask) => &dcurrent * mask,
            None => dcurrent,
        };
        let dpre = activate_backward(config.activations[li], &cache.pre_act, &cache.act, &dact);
        dz = match (&layer.norm, &cache.norm) {
            (Some(bn), Some(nc)) => {
                let g = grads.hidden[li].norm.as_mut().expect("gradient norm slot");
                g.gamma = (&dpre * &nc.xhat).sum_axis(Axis(0));
                g.beta = dpre.sum_axis(Axis(0));
                let dxhat = &dpre * &bn.gamma;
                match pass.mode {
                    Mode::Train => {
                        let n = T::from_usize_lossy(dxhat.nrows());
                        let sum_d = dxhat.sum_axis(Axis(0));
                        let sum_dx = (&dxhat * &nc.xhat).sum_axis(Axis(0));
                        let inner = &dxhat * n - &sum_d - &(&nc.xhat * &sum_dx);
                        inner * &(&nc.inv_std / n)
                    }
                    Mode::Eval => dxhat * &nc.inv_std,
                }
            }
            _ => dpre,
        };
        grads.hidden[li].dense.weight = dz.t().dot(&cache.input);
        grads.hidden[li].dense.bias = dz.sum_axis(Axis(0));
        dcurrent = dz.dot(&layer.dense.weight);
    }
    Ok((grads, loss))
}

/// Forward in the given mode followed by backward.
pub fn loss_and_gradients<T: Scalar, R: Rng + ?Sized>(
    params: &NetParams<T>,
    config: &NetConfig,
    x: ArrayView2<T>,
    targets: ArrayView2<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<(NetParams<T>, LossBreakdown<T>, ForwardPass<T>), NetError> {
    let pass = forward(params, config, x, mode, rng)?;
    let (g, l) = backward(params, config, &pass, targets)?;
    Ok((g, l, pass))
}

/// Eval-mode probabilities.
pub fn predict<T: Scalar>(params: &NetParams<T>, config: &NetConfig, x: ArrayView2<T>) -> Result<Array2<T>, NetError> {
    // Eval mode draws no random numbers.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    Ok(forward(params, config, x, Mode::Eval, &mut rng)?.probs)
}

/// Eval-mode loss on a labelled set.
pub fn evaluate_loss<T: Scalar>(
    params: &NetParams<T>,
    config: &NetConfig,
    x: ArrayView2<T>,
    targets: ArrayView2<T>,
) -> Result<LossBreakdown<T>, NetError> {
    let probs = predict(params, config, x)?;
    Ok(distloss::bce_monotone_loss(probs.view(), targets, T::lit(config.lambda_m))?)
}

impl<T: Scalar> NetParams<T> {
    /// Folds the batch statistics of a train-mode pass into the running
    /// mean/variance with momentum [`BN_MOMENTUM`] (unbiased batch variance).
    pub fn absorb_batch_stats(&mut self, pass: &ForwardPass<T>) {
        if pass.mode != Mode::Train {
            return;
        }
        let mom = T::lit(BN_MOMENTUM);
        let keep = T::one() - mom;
        for (layer, cache) in self.hidden.iter_mut().zip(&pass.hidden) {
            if let (Some(bn), Some(nc)) = (&mut layer.norm, &cache.norm) {
                let n = nc.xhat.nrows();
                let unbias = if n > 1 { T::from_usize_lossy(n) / T::from_usize_lossy(n - 1) } else { T::one() };
                Zip::from(&mut bn.running_mean).and(&nc.batch_mean).for_each(|r, &m| *r = keep * *r + mom * m);
                Zip::from(&mut bn.running_var).and(&nc.batch_var).for_each(|r, &v| *r = keep * *r + mom * v * unbias);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distnet::{Dense, HiddenLayer};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config(acts: &[Activation], sizes: &[usize], input: usize, k: usize, bn: bool, dropout: f64) -> NetConfig {
        NetConfig {
            input_dim: input,
            hidden_sizes: sizes.to_vec(),
            activations: acts.to_vec(),
            output_dim: k,
            dropout,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            batch_size: 4,
            max_epochs: 10,
            patience: 5,
            lambda_m: 1.5,
            noise_sd: 0.0,
            batch_norm: bn,
        }
    }

    #[test]
    fn outputs_are_strict_probabilities() {
        let cfg = tiny_config(&[Activation::Relu, Activation::Softmax], &[8, 8], 6, 31, true, 0.3);
        let p = NetParams::<f64>::init(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((5, 6), |(i, j)| (i as f64 - 2.0) * 3.0 + j as f64);
        for mode in [Mode::Train, Mode::Eval] {
            let out = forward(&p, &cfg, x.view(), mode, &mut rng).unwrap();
            assert_eq!(out.probs.dim(), (5, 31));
            assert!(out.probs.iter().all(|&g| g > 0.0 && g < 1.0));
        }
    }

    #[test]
    fn dropout_off_train_equals_eval_without_norm() {
        let cfg = tiny_config(&[Activation::Tanh, Activation::Elu], &[8, 8], 6, 5, false, 0.0);
        let p = NetParams::<f64>::init(&cfg, 9);
        let x = Array2::from_shape_fn((7, 6), |(i, j)| ((i * 7 + j) as f64).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = forward(&p, &cfg, x.view(), Mode::Train, &mut rng).unwrap().probs;
        let b = predict(&p, &cfg, x.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_layer_matches_hand_computation() {
        // No hidden layers: the network is a logistic regression.
        let cfg = tiny_config(&[], &[], 3, 2, false, 0.0);
        let params = NetParams {
            hidden: Vec::<HiddenLayer<f64>>::new(),
            output: Dense { weight: array![[0.5, -1.0, 2.0], [0.0, 0.25, -0.5]], bias: array![0.1, -0.2] },
        };
        let x = array![[1.0, 2.0, 3.0]];
        let out = predict(&params, &cfg, x.view()).unwrap();
        // z0 = 0.5 - 2 + 6 + 0.1 = 4.6 ; z1 = 0.5 - 1.5 - 0.2 = -1.2
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        assert!((out[[0, 0]] - s(4.6)).abs() < 1e-15);
        assert!((out[[0, 1]] - s(-1.2)).abs() < 1e-15);
    }

    #[test]
    fn zero_output_layer_with_balanced_targets_gives_log_two() {
        let cfg = tiny_config(&[Activation::Relu], &[4], 3, 4, true, 0.0);
        let mut p = NetParams::<f64>::init(&cfg, 5);
        p.output.weight.fill(0.0);
        let x = Array2::from_shape_fn((6, 3), |(i, j)| (i + j) as f64);
        let y = Array2::from_shape_fn((6, 4), |(_, j)| if j >= 2 { 1.0 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, loss, _) = loss_and_gradients(&p, &cfg, x.view(), y.view(), Mode::Train, &mut rng).unwrap();
        assert!((loss.bce - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss.penalty, 0.0);
    }

    #[test]
    fn penalty_off_gives_pure_bce_gradient() {
        let mut cfg = tiny_config(&[Activation::Sigmoid], &[5], 3, 4, false, 0.0);
        let p = NetParams::<f64>::init(&cfg, 5);
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64) - (j as f64) * 0.5);
        let y = Array2::from_shape_fn((4, 4), |(i, j)| if j >= i { 1.0 } else { 0.0 });
        cfg.lambda_m = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g0, _, pass) = loss_and_gradients(&p, &cfg, x.view(), y.view(), Mode::Train, &mut rng).unwrap();
        // Pure BCE through a sigmoid output: dL/dz = (g - y) / (T k).
        let dz = (&pass.probs - &y) / 16.0;
        let dw = dz.t().dot(&pass.output_input);
        for (a, b) in g0.output.weight.iter().zip(dw.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let cfg = tiny_config(&[Activation::Relu], &[4], 3, 4, true, 0.0);
        let p = NetParams::<f64>::init(&cfg, 5);
        let x = Array2::<f64>::zeros((2, 4));
        assert!(matches!(predict(&p, &cfg, x.view()), Err(NetError::InputDim { expected: 3, got: 4 })));
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let cfg = tiny_config(&[Activation::Elu, Activation::Relu], &[4, 4], 3, 4, false, 0.0);
        let mut p = NetParams::<f64>::init(&cfg, 5);
        p.hidden[1].dense.weight[[0, 0]] = f64::NAN;
        let x = Array2::<f64>::ones((2, 3));
        assert!(matches!(predict(&p, &cfg, x.view()), Err(NetError::NonFinite { layer: 1 })));
    }
}
