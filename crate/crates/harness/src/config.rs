//! TOML run configuration. Relative paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pricedist_core::dataio::PanelSchema;
use serde::{Deserialize, Serialize};

use crate::hpo::HpoSpace;
use crate::HarnessError;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "PRICEDIST_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub hpo: HpoSpace,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub bench: BenchSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub panel: PathBuf,
    #[serde(default = "default_hours")]
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Training window length in days.
    pub window: usize,
    pub oos_start: NaiveDate,
    pub oos_end: NaiveDate,
    /// First days of the subperiods after the first.
    #[serde(default)]
    pub subperiods: Vec<NaiveDate>,
    /// Winsorization share clamped in each tail.
    #[serde(default = "default_winsor")]
    pub winsor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    /// Epoch cap of a full training at each subperiod start.
    pub max_epochs: usize,
    /// Epoch cap of each daily update.
    pub update_epochs: usize,
    /// Epoch cap of each cross-validation fit during the search.
    pub hpo_epochs: usize,
    pub patience: usize,
    pub noise_sd: f64,
    pub grid_points: usize,
    /// Rolling days between checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self { max_epochs: 1500, update_epochs: 500, hpo_epochs: 1500, patience: 100, noise_sd: 0.1, grid_points: 400, checkpoint_every: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub lear_windows: Vec<usize>,
    pub lear_lambdas: usize,
    pub lear_folds: usize,
    /// Quantile-regression calibration days; also the naive error window.
    pub calibration: usize,
    pub naive_draws: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { lear_windows: vec![56, 84, 1092, 1456], lear_lambdas: 100, lear_folds: 7, calibration: 182, naive_draws: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_hours() -> usize {
    24
}

fn default_winsor() -> f64 {
    0.001
}

fn default_runs() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let mut cfg: RunConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.data.panel, &mut self.run.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.data.hours == 0 {
            return bad("data.hours must be positive".into());
        }
        if self.schedule.oos_end < self.schedule.oos_start {
            return bad("schedule.oos_end precedes oos_start".into());
        }
        if !(0.0..0.5).contains(&self.schedule.winsor) {
            return bad(format!("schedule.winsor {} outside [0, 0.5)", self.schedule.winsor));
        }
        if self.run.runs == 0 {
            return bad("run.runs must be at least 1".into());
        }
        if self.training.grid_points < 2 || self.training.checkpoint_every == 0 {
            return bad("training.grid_points must be >= 2 and checkpoint_every >= 1".into());
        }
        if self.bench.lear_windows.is_empty() || self.bench.lear_folds < 2 || self.bench.calibration < 2 {
            return bad("bench needs at least one LEAR window, 2 folds and 2 calibration days".into());
        }
        self.hpo.validate()
    }

    pub fn schema(&self) -> PanelSchema {
        PanelSchema::with_hours(self.data.hours)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
panel = "panel.csv"
hours = 4

[schedule]
window = 300
oos_start = "2021-01-01"
oos_end = "2021-03-01"

[run]
seed = 7
out_dir = "out"
"#;

    #[test]
    fn defaults_and_path_resolution() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.resolve(Path::new("/tmp/x"));
        cfg.validate().unwrap();
        assert_eq!(cfg.data.panel, PathBuf::from("/tmp/x/panel.csv"));
        assert_eq!(cfg.hpo, HpoSpace::default());
        assert_eq!(cfg.training.update_epochs, 500);
        assert_eq!(cfg.bench.lear_windows, vec![56, 84, 1092, 1456]);
        assert_eq!(cfg.schedule.winsor, 0.001);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nsede = 8");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn inconsistent_values_are_config_errors() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.schedule.winsor = 0.7;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}
