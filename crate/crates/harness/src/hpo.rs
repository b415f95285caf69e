//! Per-hour hyperparameter search: stratified candidate sampling over the
//! search space and k-fold cross-validation of each candidate.

use ndarray::{Array2, Axis};
use pricedist_core::distnet::{fit, Activation, Dataset, NetConfig, NetParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingSection;
use crate::{seeds, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpoSpace {
    /// Sampled on a log scale.
    pub learning_rate: (f64, f64),
    pub dropout: (f64, f64),
    pub weight_decay: (f64, f64),
    /// Units per hidden layer, sampled independently for each layer.
    pub hidden: (usize, usize),
    pub batch_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub n_candidates: usize,
    pub folds: usize,
    pub lambda_m: f64,
    pub levels: usize,
    pub layers: usize,
    pub ensembles: usize,
}

impl Default for HpoSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-4, 3e-3),
            dropout: (0.0, 0.5),
            weight_decay: (1e-6, 1e-2),
            hidden: (32, 256),
            batch_sizes: vec![32, 64],
            activations: Activation::ALL.to_vec(),
            n_candidates: 40,
            folds: 5,
            lambda_m: 1.5,
            levels: 31,
            layers: 2,
            ensembles: 4,
        }
    }
}

impl HpoSpace {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(format!("hpo: {m}")));
        let ordered = |r: (f64, f64)| r.0 <= r.1 && r.0.is_finite() && r.1.is_finite();
        if !ordered(self.learning_rate) || self.learning_rate.0 <= 0.0 {
            return bad("learning_rate must be a positive increasing range");
        }
        if !ordered(self.dropout) || self.dropout.0 < 0.0 || self.dropout.1 > 0.5 {
            return bad("dropout must lie in [0, 0.5]");
        }
        if !ordered(self.weight_decay) || self.weight_decay.0 < 0.0 {
            return bad("weight_decay must be a non-negative increasing range");
        }
        if self.hidden.0 == 0 || self.hidden.0 > self.hidden.1 {
            return bad("hidden must be a positive increasing range");
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) || self.activations.is_empty() {
            return bad("batch_sizes and activations must be non-empty");
        }
        if self.n_candidates == 0 || self.folds < 2 || self.layers == 0 || self.ensembles == 0 || self.levels < 2 {
            return bad("n_candidates, layers, ensembles >= 1; folds, levels >= 2");
        }
        Ok(())
    }

    /// `n_candidates` configurations from a Latin hypercube over the
    /// continuous ranges; discrete choices cycle through shuffled lists so
    /// every option appears about equally often.
    pub fn sample(&self, input_dim: usize, training: &TrainingSection, seed: u64) -> Vec<NetConfig> {
        let n = self.n_candidates;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strata = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            perm.iter().map(|&k| (k as f64 + rng.random::<f64>()) / n as f64).collect()
        };
        let lerp = |r: (f64, f64), u: f64| r.0 + u * (r.1 - r.0);
        let lr = strata(&mut rng);
        let dropout = strata(&mut rng);
        let decay = strata(&mut rng);
        let hidden: Vec<Vec<f64>> = (0..self.layers).map(|_| strata(&mut rng)).collect();
        let cycle = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
            let mut v: Vec<usize> = (0..n).map(|i| i % len).collect();
            v.shuffle(rng);
            v
        };
        let batch = cycle(self.batch_sizes.len(), &mut rng);
        let acts: Vec<Vec<usize>> = (0..self.layers).map(|_| cycle(self.activations.len(), &mut rng)).collect();
        let (hlo, hhi) = (self.hidden.0 as f64, self.hidden.1 as f64 + 1.0);
        (0..n)
            .map(|i| NetConfig {
                input_dim,
                hidden_sizes: hidden.iter().map(|h| (lerp((hlo, hhi), h[i]).floor() as usize).min(self.hidden.1)).collect(),
                activations: acts.iter().map(|a| self.activations[a[i]]).collect(),
                output_dim: self.levels,
                dropout: lerp(self.dropout, dropout[i]),
                learning_rate: lerp((self.learning_rate.0.ln(), self.learning_rate.1.ln()), lr[i]).exp(),
                weight_decay: lerp(self.weight_decay, decay[i]),
                batch_size: self.batch_sizes[batch[i]],
                max_epochs: training.max_epochs,
                patience: training.patience,
                lambda_m: self.lambda_m,
                noise_sd: training.noise_sd,
                batch_norm: true,
            })
            .collect()
    }
}

/// Outcome of the search for one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourSelection {
    pub hour: usize,
    pub selected: usize,
    pub config: NetConfig,
    /// Mean validation loss per candidate; `None` for failed candidates.
    pub scores: Vec<Option<f64>>,
    pub failures: Vec<String>,
}

/// Mean held-out loss of `config` over `folds` folds of shuffled rows.
/// Each fold fit early-stops on its own held-out rows.
pub fn cross_validate(config: &NetConfig, x: &Array2<f64>, y: &Array2<f64>, folds: usize, epochs: usize, seed: u64) -> Result<f64, HarnessError> {
    let n = x.nrows();
    if n < folds * config.batch_size.max(2) {
        return Err(HarnessError::Config(format!("{n} rows are fewer than {folds} folds x batch {}", config.batch_size)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::derive(seed, "folds", &[])));
    let mut total = 0.0;
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let val: Vec<usize> = order[lo..hi].to_vec();
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let (tx, ty) = (x.select(Axis(0), &train), y.select(Axis(0), &train));
        let (vx, vy) = (x.select(Axis(0), &val), y.select(Axis(0), &val));
        let fold_seed = seeds::derive(seed, "fold", &[f as u64]);
        let start = NetParams::init(config, fold_seed);
        let out = fit(config, start, Dataset::new(tx.view(), ty.view()), Dataset::new(vx.view(), vy.view()), epochs, fold_seed ^ 1)?;
        total += out.best_val_loss;
    }
    Ok(total / folds as f64)
}

/// Cross-validates every candidate and keeps the smallest mean loss; ties
/// go to the lower candidate index.
pub fn select(
    hour: usize,
    candidates: &[NetConfig],
    x: &Array2<f64>,
    y: &Array2<f64>,
    folds: usize,
    epochs: usize,
    seed: u64,
) -> Result<HourSelection, HarnessError> {
    let results: Vec<Result<f64, HarnessError>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| cross_validate(c, x, y, folds, epochs, seeds::derive(seed, "candidate", &[i as u64])))
        .collect();
    let mut scores = Vec::with_capacity(candidates.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) if s.is_finite() => scores.push(Some(s)),
            Ok(s) => {
                failures.push(format!("candidate {i}: loss {s}"));
                scores.push(None);
            }
            Err(e) => {
                log::warn!("hour {}: candidate {i} failed: {e}", hour + 1);
                failures.push(format!("candidate {i}: {e}"));
                scores.push(None);
            }
        }
    }
    let best = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
            Some((_, b)) if b <= s => acc,
            _ => Some((i, s)),
        });
    let Some((selected, _)) = best else {
        return Err(HarnessError::Numeric(format!("hour {}: every candidate failed: {}", hour + 1, failures.join("; "))));
    };
    Ok(HourSelection { hour, selected, config: candidates[selected].clone(), scores, failures })
}

/// Samples candidates for `hour` and selects one by cross-validation.
pub fn hpo_search(
    space: &HpoSpace,
    training: &TrainingSection,
    hour: usize,
    x: &Array2<f64>,
    y: &Array2<f64>,
    seed: u64,
) -> Result<HourSelection, HarnessError> {
    let hour_seed = seeds::derive(seed, "hpo", &[hour as u64]);
    let candidates = space.sample(x.ncols(), training, hour_seed);
    select(hour, &candidates, x, y, space.folds, training.hpo_epochs, hour_seed)
}
