//! Pinball loss, discrete CRPS, Diebold–Mariano tests and comparison tables.

mod dm;
mod report;

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cdftools::QuantileForecast;
use crate::dataio::PricePanel;
use crate::Scalar;

pub use dm::{dm_series, dm_test, newey_west_variance, nw_lag, DmMode, DmOutcome, DmResult, Sided, MIN_DM_DAYS};
pub use report::{report, EvalReport, Subperiod};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("level set needs {needed} levels, forecast has {got}")]
    Levels { needed: usize, got: usize },
    #[error("model `{model}` has no forecast for {date} hour {hour}")]
    MissingForecast { model: String, date: NaiveDate, hour: usize },
    #[error("no realized price for {0}")]
    NoRealization(NaiveDate),
    #[error("panels are misaligned: {0}")]
    Misaligned(String),
    #[error("need at least {needed} days for a DM test, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("loss panels share no days")]
    NoOverlap,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(1{p <= q} - alpha)(q - p)`; zero iff `q == p`.
#[inline]
pub fn pinball<T: Scalar>(q: T, p: T, alpha: T) -> T {
    let ind = if p <= q { T::one() } else { T::zero() };
    (ind - alpha) * (q - p)
}

/// Which of the 99 forecast levels a score averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSet {
    /// All 99 levels.
    All,
    /// Levels 0.01..0.10 and 0.90..0.99.
    Tails,
}

impl LevelSet {
    /// Indices into a 99-level forecast.
    pub fn indices(self) -> Vec<usize> {
        match self {
            LevelSet::All => (0..99).collect(),
            LevelSet::Tails => (0..10).chain(89..99).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LevelSet::All => "all",
            LevelSet::Tails => "tails",
        }
    }
}

/// Mean pinball loss of `quantiles` (at `levels`) over the level indices `subset`.
pub fn crps_subset<T: Scalar>(quantiles: &[T], levels: &[T], p: T, subset: &[usize]) -> T {
    let sum: T = subset.iter().map(|&i| pinball(quantiles[i], p, levels[i])).sum();
    sum / T::from_usize_lossy(subset.len())
}

/// Discrete CRPS of a 99-level forecast over `set`.
pub fn crps<T: Scalar>(quantiles: &[T], levels: &[T], p: T, set: LevelSet) -> Result<T, EvalError> {
    if quantiles.len() != 99 || levels.len() != 99 {
        return Err(EvalError::Levels { needed: 99, got: quantiles.len().min(levels.len()) });
    }
    Ok(crps_subset(quantiles, levels, p, &set.indices()))
}

/// Per-(day, hour) CRPS of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPanel {
    pub model: String,
    pub dates: Vec<NaiveDate>,
    /// `dates.len() x hours`.
    pub losses: Array2<f64>,
    pub level_set: LevelSet,
}

impl LossPanel {
    /// Scores forecasts against realized panel prices. Every listed date
    /// must carry a forecast for every hour of the panel.
    pub fn from_forecasts(
        model: &str,
        forecasts: &[QuantileForecast],
        panel: &PricePanel,
        levels: &[f64],
        set: LevelSet,
    ) -> Result<Self, EvalError> {
        if forecasts.is_empty() {
            return Err(EvalError::Empty("forecasts"));
        }
        let hours = panel.hours();
        let mut by_key: BTreeMap<(NaiveDate, usize), &QuantileForecast> = BTreeMap::new();
        for f in forecasts {
            by_key.insert((f.date, f.hour), f);
        }
        let dates: Vec<NaiveDate> = {
            let mut d: Vec<NaiveDate> = by_key.keys().map(|k| k.0).collect();
            d.dedup();
            d
        };
        let idx = set.indices();
        let mut losses = Array2::zeros((dates.len(), hours));
        for (r, &date) in dates.iter().enumerate() {
            let t = panel.index_of(date).ok_or(EvalError::NoRealization(date))?;
            for h in 0..hours {
                let f = by_key
                    .get(&(date, h))
                    .ok_or_else(|| EvalError::MissingForecast { model: model.to_string(), date, hour: h + 1 })?;
                if f.values.len() != levels.len() || levels.len() != 99 {
                    return Err(EvalError::Levels { needed: 99, got: f.values.len() });
                }
                losses[[r, h]] = crps_subset(&f.values, levels, panel.prices[[t, h]], &idx);
            }
        }
        Ok(Self { model: model.to_string(), dates, losses, level_set: set })
    }

    pub fn hours(&self) -> usize {
        self.losses.ncols()
    }

    pub fn mean(&self) -> f64 {
        self.losses.mean().unwrap_or(f64::NAN)
    }

    /// Rows restricted to `dates` (which must all be present).
    pub fn restrict(&self, dates: &[NaiveDate]) -> Result<LossPanel, EvalError> {
        let pos: BTreeMap<NaiveDate, usize> = self.dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let rows: Vec<usize> = dates
            .iter()
            .map(|d| pos.get(d).copied().ok_or_else(|| EvalError::Misaligned(format!("{} lacks {d}", self.model))))
            .collect::<Result<_, _>>()?;
        Ok(LossPanel {
            model: self.model.clone(),
            dates: dates.to_vec(),
            losses: self.losses.select(ndarray::Axis(0), &rows),
            level_set: self.level_set,
        })
    }

    /// Long-format `model,date,hour,crps` records for plotting.
    pub fn write_long_csv<W: Write>(&self, out: W, with_header: bool) -> Result<(), EvalError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record(["model", "level_set", "date", "hour", "crps"])?;
        }
        for (r, d) in self.dates.iter().enumerate() {
            for h in 0..self.hours() {
                w.write_record([
                    self.model.clone(),
                    self.level_set.name().to_string(),
                    d.to_string(),
                    (h + 1).to_string(),
                    self.losses[[r, h]].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
