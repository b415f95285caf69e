//! Synthetic market panel with a known Gaussian conditional distribution.
//!
//! For hour `h` with level `m_h = 50 + 2h`, load `L ~ U(0, 1)` and the
//! previous day's price `p'`:
//!
//! ```text
//! mean = m_h + 0.6 (p' - m_h) + 12 (L - 0.5)
//! sd   = 2 + 5 L + 0.05 |p' - m_h|
//! ```
//!
//! Load is the day-ahead forecast, so the conditional distribution of each
//! price is known from information available before delivery.

use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use pricedist_core::cdftools::{forecast_levels, write_quantile_csv, QuantileForecast};
use pricedist_core::dataio::{write_panel, PricePanel};
use pricedist_core::stats::normal_quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{BenchSection, DataSection, RunConfig, RunSection, ScheduleSection, TrainingSection};
use crate::hpo::HpoSpace;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub days: usize,
    pub hours: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { days: 800, hours: 4, start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"), seed: 1 }
    }
}

/// Generated panel plus the true conditional mean and standard deviation.
#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub panel: PricePanel,
    pub mean: Array2<f64>,
    pub sd: Array2<f64>,
}

impl SynthPanel {
    /// Quantiles of the true predictive distribution.
    pub fn oracle_quantiles(&self, day: usize, hour: usize, levels: &[f64]) -> Vec<f64> {
        let (m, s) = (self.mean[[day, hour]], self.sd[[day, hour]]);
        levels.iter().map(|&a| m + s * normal_quantile(a)).collect()
    }
}

impl SynthPanel {
    /// Oracle quantile forecasts at the 99 forecast levels.
    pub fn oracle_forecasts(&self, days: Range<usize>) -> Vec<QuantileForecast> {
        let levels = forecast_levels();
        days.flat_map(|d| (0..self.panel.hours()).map(move |h| (d, h)))
            .map(|(d, h)| QuantileForecast { date: self.panel.days[d], hour: h, values: self.oracle_quantiles(d, h, &levels) })
            .collect()
    }
}

/// A scaled-down run over the last 100 days of a synthetic panel: short
/// training caps, a small search and small LEAR windows.
pub fn demo_config(spec: &SynthSpec, panel: PathBuf, out_dir: PathBuf, seed: u64) -> RunConfig {
    let oos = spec.days.saturating_sub(100);
    let date = |d: usize| spec.start + chrono::Duration::days(d as i64);
    RunConfig {
        data: DataSection { panel, hours: spec.hours },
        schedule: ScheduleSection {
            window: oos.saturating_sub(10),
            oos_start: date(oos),
            oos_end: date(spec.days - 1),
            subperiods: vec![],
            winsor: 0.001,
        },
        hpo: HpoSpace {
            learning_rate: (1e-3, 1e-2),
            hidden: (16, 64),
            n_candidates: 8,
            folds: 3,
            ensembles: 2,
            ..Default::default()
        },
        training: TrainingSection {
            max_epochs: 300,
            update_epochs: 10,
            hpo_epochs: 150,
            patience: 30,
            noise_sd: 0.1,
            grid_points: 400,
            checkpoint_every: 25,
        },
        bench: BenchSection { lear_windows: vec![56, 84, 182, 364], lear_lambdas: 50, lear_folds: 7, calibration: 182, naive_draws: 5000 },
        run: RunSection { seed, out_dir, runs: 1 },
    }
}

/// Writes `panel.csv`, `config.toml` and the oracle forecasts for the
/// out-of-sample days into `dir`. Paths inside the config are relative to
/// `dir`; the oracle lands in the run's forecasts directory so that `eval`
/// ranks it next to the models.
pub fn write_bundle(spec: &SynthSpec, dir: &Path) -> Result<(SynthPanel, RunConfig), HarnessError> {
    let synth = generate(spec)?;
    std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let cfg = demo_config(spec, "panel.csv".into(), "run".into(), spec.seed);
    let path = dir.join("panel.csv");
    let file = std::fs::File::create(&path).map_err(HarnessError::io(&path))?;
    write_panel(std::io::BufWriter::new(file), &synth.panel, &cfg.schema())?;
    let path = dir.join("config.toml");
    let text = toml::to_string(&cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::write(&path, text).map_err(HarnessError::io(&path))?;
    let forecasts = dir.join("run").join("forecasts");
    std::fs::create_dir_all(&forecasts).map_err(HarnessError::io(&forecasts))?;
    let path = forecasts.join("oracle.csv");
    let file = std::fs::File::create(&path).map_err(HarnessError::io(&path))?;
    let oos = spec.days.saturating_sub(100);
    write_quantile_csv(std::io::BufWriter::new(file), &synth.oracle_forecasts(oos..spec.days), &forecast_levels())?;
    let mut resolved = cfg;
    resolved.resolve(dir);
    resolved.validate()?;
    Ok((synth, resolved))
}

pub fn level(hour: usize) -> f64 {
    50.0 + 2.0 * hour as f64
}

pub fn generate(spec: &SynthSpec) -> Result<SynthPanel, HarnessError> {
    let (n, hours) = (spec.days, spec.hours);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let days: Vec<NaiveDate> = (0..n).map(|i| spec.start + chrono::Duration::days(i as i64)).collect();
    let load = Array2::from_shape_fn((n, hours), |_| rng.random_range(0.0..1.0));
    let res = Array2::from_shape_fn((n, hours), |_| rng.random_range(0.0..1.0));
    let mut prices = Array2::zeros((n, hours));
    let mut mean = Array2::zeros((n, hours));
    let mut sd = Array2::zeros((n, hours));
    for d in 0..n {
        for h in 0..hours {
            let m = level(h);
            let prev = if d == 0 { m } else { prices[[d - 1, h]] };
            let l = load[[d, h]];
            mean[[d, h]] = m + 0.6 * (prev - m) + 12.0 * (l - 0.5);
            sd[[d, h]] = 2.0 + 5.0 * l + 0.05 * (prev - m).abs();
            prices[[d, h]] = mean[[d, h]] + sd[[d, h]] * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut walk = |start: f64| -> Vec<f64> {
        let mut v = start;
        (0..n)
            .map(|_| {
                v += 0.1 * rng.sample::<f64, _>(StandardNormal);
                v
            })
            .collect()
    };
    let (eua, coal, gas, oil) = (walk(25.0), walk(80.0), walk(20.0), walk(60.0));
    let panel = PricePanel::new(days, prices, load, res, eua, coal, gas, oil)?;
    Ok(SynthPanel { panel, mean, sd })
}
