//! Mini-batch training with input-noise augmentation and early stopping.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::net::{self, Mode};
use super::optim::{adamw_step, OptimizerState};
use super::{NetConfig, NetError, NetParams};
use crate::Scalar;

/// Share of rows held out for validation.
pub const VALIDATION_SHARE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Snapshot with the lowest validation loss seen.
    pub params: NetParams<T>,
    pub best_val_loss: T,
    /// Epoch of the best snapshot; 0 means the starting parameters.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Shuffled 80/20 split of `0..n` into (train, validation) row indices.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0005_0117_0000));
    let n_val = ((n as f64 * VALIDATION_SHARE).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Borrowed labelled dataset.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub y: ArrayView2<'a, T>,
}

impl<'a, T: Scalar> Dataset<'a, T> {
    pub fn new(x: ArrayView2<'a, T>, y: ArrayView2<'a, T>) -> Self {
        Self { x, y }
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn select(&self, idx: &[usize]) -> (Array2<T>, Array2<T>) {
        (self.x.select(Axis(0), idx), self.y.select(Axis(0), idx))
    }
}

/// Splits batches so that no batch has a single row (batch norm needs two).
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = order.len() - size - 1;
        out.pop();
        out.push(&order[start..]);
    }
    out
}

/// Core loop: trains from `start` on `train`, early-stops on `val`.
///
/// The starting parameters are evaluated first (epoch 0) and compete for the
/// best snapshot. After every epoch the counter of non-improving epochs is
/// compared against `patience`; with patience 0 exactly one epoch runs.
pub fn fit<T: Scalar>(
    config: &NetConfig,
    start: NetParams<T>,
    train: Dataset<'_, T>,
    val: Dataset<'_, T>,
    max_epochs: usize,
    seed: u64,
) -> Result<TrainOutcome<T>, NetError> {
    config.validate()?;
    if train.rows() < 2 || val.rows() == 0 {
        return Err(NetError::InsufficientData { rows: train.rows() + val.rows(), needed: 3 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| NetError::Config(e.to_string()))?;
    let lr = T::lit(config.learning_rate);
    let wd = T::lit(config.weight_decay);

    let mut params = start;
    let mut opt = OptimizerState::new(&params);
    let initial = net::evaluate_loss(&params, config, val.x, val.y)?.total;
    if !initial.is_finite() {
        return Err(NetError::Diverged { epoch: 0 });
    }
    let mut best = TrainOutcome { params: params.clone(), best_val_loss: initial, best_epoch: 0, epochs_run: 0 };
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train.rows()).collect();

    for epoch in 1..=max_epochs {
        order.shuffle(&mut rng);
        for batch in batches(&order, config.batch_size) {
            let (mut xb, yb) = train.select(batch);
            if config.noise_sd > 0.0 {
                xb.mapv_inplace(|v| v + T::lit(noise.sample(&mut rng)));
            }
            let (grads, loss, pass) =
                net::loss_and_gradients(&params, config, xb.view(), yb.view(), Mode::Train, &mut rng)
                    .map_err(|e| match e {
                        NetError::NonFinite { .. } => NetError::Diverged { epoch },
                        other => other,
                    })?;
            if !loss.total.is_finite() {
                return Err(NetError::Diverged { epoch });
            }
            adamw_step(&mut opt, &mut params, &grads, lr, wd);
            params.absorb_batch_stats(&pass);
        }
        if !params.all_finite() {
            return Err(NetError::Diverged { epoch });
        }
        let val_loss = net::evaluate_loss(&params, config, val.x, val.y)
            .map_err(|_| NetError::Diverged { epoch })?
            .total;
        if !val_loss.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        best.epochs_run = epoch;
        if val_loss < best.best_val_loss {
            best.params = params.clone();
            best.best_val_loss = val_loss;
            best.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience {
            break;
        }
    }
    Ok(best)
}

fn check_rows<T>(config: &NetConfig, data: &Dataset<'_, T>) -> Result<(), NetError> {
    let needed = 2 * config.batch_size;
    if data.x.nrows() < needed || data.x.nrows() != data.y.nrows() {
        return Err(NetError::InsufficientData { rows: data.x.nrows(), needed });
    }
    Ok(())
}

/// Full training from a seeded initialization on a shuffled 80/20 split,
/// for at most `config.max_epochs` epochs.
pub fn train<T: Scalar>(config: &NetConfig, data: Dataset<'_, T>, seed: u64) -> Result<TrainOutcome<T>, NetError> {
    config.validate()?;
    check_rows(config, &data)?;
    let (tr, va) = split_indices(data.rows(), seed);
    let (trx, try_) = data.select(&tr);
    let (vax, vay) = data.select(&va);
    let start = NetParams::init(config, seed);
    fit(config, start, Dataset::new(trx.view(), try_.view()), Dataset::new(vax.view(), vay.view()), config.max_epochs, seed.wrapping_add(1))
}

/// Continues training from `params` for at most `epochs` epochs, using the
/// same split rule as [`train`].
pub fn update<T: Scalar>(
    params: &NetParams<T>,
    config: &NetConfig,
    data: Dataset<'_, T>,
    epochs: usize,
    seed: u64,
) -> Result<TrainOutcome<T>, NetError> {
    config.validate()?;
    check_rows(config, &data)?;
    let (tr, va) = split_indices(data.rows(), seed);
    let (trx, try_) = data.select(&tr);
    let (vax, vay) = data.select(&va);
    fit(config, params.clone(), Dataset::new(trx.view(), try_.view()), Dataset::new(vax.view(), vay.view()), epochs, seed.wrapping_add(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distnet::Activation;

    #[test]
    fn batches_never_leave_a_single_row() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        let b = batches(&order[..1], 4);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn split_is_eighty_twenty_and_disjoint() {
        let (tr, va) = split_indices(100, 7);
        assert_eq!((tr.len(), va.len()), (80, 20));
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 7), (tr, va));
    }

    fn toy(n: usize) -> (Array2<f64>, Array2<f64>) {
        let x = Array2::from_shape_fn((n, 3), |(i, j)| (((i * 37 + j * 11) % 97) as f64 / 48.5) - 1.0);
        let y = Array2::from_shape_fn((n, 5), |(i, _)| if x[[i, 0]] > 0.0 { 1.0 } else { 0.0 });
        (x, y)
    }

    fn cfg() -> NetConfig {
        NetConfig {
            input_dim: 3,
            hidden_sizes: vec![8, 8],
            activations: vec![Activation::Tanh, Activation::Relu],
            output_dim: 5,
            dropout: 0.0,
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            batch_size: 16,
            max_epochs: 200,
            patience: 200,
            lambda_m: 1.5,
            noise_sd: 0.0,
            batch_norm: true,
        }
    }

    #[test]
    fn patience_zero_runs_one_epoch() {
        let (x, y) = toy(64);
        let mut c = cfg();
        c.patience = 0;
        let out = train(&c, Dataset::new(x.view(), y.view()), 3).unwrap();
        assert_eq!(out.epochs_run, 1);
    }

    #[test]
    fn separable_targets_are_learned() {
        let (x, y) = toy(200);
        let out = train(&cfg(), Dataset::new(x.view(), y.view()), 3).unwrap();
        assert!(out.best_val_loss < 0.1, "val loss {}", out.best_val_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = toy(80);
        let mut c = cfg();
        c.max_epochs = 20;
        c.dropout = 0.2;
        c.noise_sd = 0.1;
        let a = train(&c, Dataset::new(x.view(), y.view()), 5).unwrap();
        let b = train(&c, Dataset::new(x.view(), y.view()), 5).unwrap();
        assert_eq!(a.best_val_loss, b.best_val_loss);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn update_semantics() {
        let (x, y) = toy(80);
        let mut c = cfg();
        c.max_epochs = 30;
        let data = Dataset::new(x.view(), y.view());
        let trained = train(&c, data, 5).unwrap();
        let same = update(&trained.params, &c, data, 0, 5).unwrap();
        assert_eq!(same.params, trained.params);
        let more = update(&trained.params, &c, data, 20, 5).unwrap();
        assert!(more.best_val_loss <= trained.best_val_loss + 1e-6);

        let (x2, y2) = toy(81);
        let shifted = update(&trained.params, &c, Dataset::new(x2.view(), y2.view()), 20, 5).unwrap();
        assert_ne!(shifted.params, more.params);
    }

    #[test]
    fn too_little_data_is_rejected() {
        let (x, y) = toy(20);
        assert!(matches!(
            train(&cfg(), Dataset::new(x.view(), y.view()), 1),
            Err(NetError::InsufficientData { rows: 20, needed: 32 })
        ));
    }
}
