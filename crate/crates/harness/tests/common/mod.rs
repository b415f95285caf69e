#![allow(dead_code)]

use std::path::Path;

use pricedist_harness::synth::{write_bundle, SynthPanel, SynthSpec};
use pricedist_harness::RunConfig;

pub const DAYS: usize = 400;
pub const HOURS: usize = 2;
pub const OOS_DAYS: usize = 40;

/// Synthetic bundle in `dir` with a configuration small enough for tests:
/// 40 out-of-sample days, a two-candidate search and a few epochs.
pub fn tiny(dir: &Path, seed: u64) -> (SynthPanel, RunConfig) {
    let spec = SynthSpec { days: DAYS, hours: HOURS, seed, ..Default::default() };
    let (synth, mut cfg) = write_bundle(&spec, dir).unwrap();
    cfg.schedule.oos_start = synth.panel.days[DAYS - OOS_DAYS];
    cfg.schedule.window = 200;
    cfg.hpo.n_candidates = 2;
    cfg.hpo.folds = 2;
    cfg.hpo.hidden = (4, 8);
    cfg.hpo.ensembles = 2;
    cfg.training.hpo_epochs = 5;
    cfg.training.max_epochs = 10;
    cfg.training.update_epochs = 2;
    cfg.training.patience = 3;
    cfg.training.checkpoint_every = 7;
    cfg.training.grid_points = 200;
    cfg.bench.lear_windows = vec![28, 56];
    cfg.bench.lear_lambdas = 20;
    cfg.bench.calibration = 60;
    cfg.bench.naive_draws = 500;
    cfg.validate().unwrap();
    (synth, cfg)
}

pub fn write_config(cfg: &RunConfig, path: &Path) {
    std::fs::write(path, toml::to_string(cfg).unwrap()).unwrap();
}
