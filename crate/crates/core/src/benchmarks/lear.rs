//! LASSO-estimated autoregressive point model on asinh-transformed prices,
//! fitted separately for every delivery hour and calibration window.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::{Array1, Array2, Array3};

use super::lasso::{lear_fit, DEFAULT_FOLDS, DEFAULT_LAMBDAS};
use super::BenchError;
use crate::dataio::{PricePanel, HISTORY_DAYS};
use crate::transform::{TransformError, TransformState};

pub const DEFAULT_LEAR_WINDOWS: [usize; 4] = [56, 84, 1092, 1456];
const PRICE_LAGS: [usize; 4] = [1, 2, 3, 7];
const LOAD_LAGS: [usize; 3] = [0, 1, 7];
const RES_LAGS: [usize; 2] = [0, 1];
const FUEL_LAG: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct LearConfig {
    pub windows: Vec<usize>,
    pub n_lambdas: usize,
    pub folds: usize,
}

impl Default for LearConfig {
    fn default() -> Self {
        Self { windows: DEFAULT_LEAR_WINDOWS.to_vec(), n_lambdas: DEFAULT_LAMBDAS, folds: DEFAULT_FOLDS }
    }
}

/// Feature count for `hours` delivery hours.
pub fn lear_width(hours: usize) -> usize {
    (PRICE_LAGS.len() + LOAD_LAGS.len() + RES_LAGS.len()) * hours + 4 + 7
}

/// Transformed price lags 1, 2, 3 and 7 of every hour, load forecasts at
/// lags 0, 1, 7, renewable forecasts at lags 0, 1, fuel and emission prices
/// at lag 2, and one dummy per weekday. Needs [`HISTORY_DAYS`] earlier days.
pub fn lear_features(panel: &PricePanel, state: &TransformState<f64>, day: usize) -> Vec<f64> {
    let hours = panel.hours();
    let mut row = Vec::with_capacity(lear_width(hours));
    for lag in PRICE_LAGS {
        row.extend(panel.prices.row(day - lag).iter().map(|&p| state.forward(p)));
    }
    for lag in LOAD_LAGS {
        row.extend(panel.load_fc.row(day - lag).iter());
    }
    for lag in RES_LAGS {
        row.extend(panel.res_fc.row(day - lag).iter());
    }
    for fuel in [&panel.eua, &panel.coal, &panel.gas, &panel.oil] {
        row.push(fuel[day - FUEL_LAG]);
    }
    for wd in 1..=7u8 {
        row.push(if panel.weekday[day] == wd { 1.0 } else { 0.0 });
    }
    row
}

/// Transform fitted on every price in the window. A window whose median
/// absolute deviation is zero keeps its median and uses unit scale.
fn window_transform(panel: &PricePanel, start: usize, day: usize) -> Result<TransformState<f64>, BenchError> {
    let pooled: Vec<f64> = panel.prices.slice(ndarray::s![start..day, ..]).iter().copied().collect();
    match TransformState::fit(&pooled) {
        Ok(s) => Ok(s),
        Err(TransformError::DegenerateScale { median }) => Ok(TransformState { median, mad_scaled: 1.0 }),
        Err(e) => Err(e.into()),
    }
}

/// Point forecasts for every hour of `day` from one calibration window of
/// `window` days ending the day before.
pub fn lear_day(panel: &PricePanel, day: usize, window: usize, cfg: &LearConfig) -> Result<Vec<f64>, BenchError> {
    let needed = window + HISTORY_DAYS;
    if day < needed || day >= panel.n_days() {
        return Err(BenchError::InsufficientHistory { day, needed });
    }
    let start = day - window;
    let state = window_transform(panel, start, day)?;
    let width = lear_width(panel.hours());
    let mut x = Array2::zeros((window, width));
    for (r, s) in (start..day).enumerate() {
        x.row_mut(r).assign(&Array1::from(lear_features(panel, &state, s)));
    }
    let target = Array1::from(lear_features(panel, &state, day));
    (0..panel.hours())
        .map(|h| {
            let y = Array1::from_shape_fn(window, |r| state.forward(panel.prices[[start + r, h]]));
            let cv = lear_fit(x.view(), y.view(), cfg.n_lambdas, cfg.folds)
                .map_err(|e| e.context("lear", panel.days[day], h, Some(window)))?;
            Ok(state.inverse(cv.fit.predict(target.view())))
        })
        .collect()
}

/// Single-hour convenience wrapper around [`lear_day`].
pub fn lear_forecast(panel: &PricePanel, day: usize, hour: usize, window: usize, cfg: &LearConfig) -> Result<f64, BenchError> {
    Ok(lear_day(panel, day, window, cfg)?[hour])
}

/// Point forecasts indexed by (date, hour, window).
#[derive(Debug, Clone, PartialEq)]
pub struct PointForecastSet {
    pub windows: Vec<usize>,
    pub dates: Vec<NaiveDate>,
    /// Shape (dates, hours, windows).
    pub values: Array3<f64>,
    index: HashMap<NaiveDate, usize>,
}

impl PointForecastSet {
    pub fn new(windows: Vec<usize>, dates: Vec<NaiveDate>, values: Array3<f64>) -> Result<Self, BenchError> {
        if values.dim().0 != dates.len() || values.dim().2 != windows.len() {
            return Err(BenchError::Shape(format!("values {:?} vs {} dates, {} windows", values.dim(), dates.len(), windows.len())));
        }
        let index: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        if index.len() != dates.len() {
            return Err(BenchError::Format("duplicate date".into()));
        }
        Ok(Self { windows, dates, values, index })
    }

    pub fn hours(&self) -> usize {
        self.values.dim().1
    }

    /// One value per window.
    pub fn get(&self, date: NaiveDate, hour: usize) -> Option<Vec<f64>> {
        let &i = self.index.get(&date)?;
        (hour < self.hours()).then(|| self.values.slice(ndarray::s![i, hour, ..]).to_vec())
    }

    /// Columns `date, hour, lear_<window>...`; hours are written 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string(), "hour".to_string()];
        header.extend(self.windows.iter().map(|w| format!("lear_{w}")));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            for h in 0..self.hours() {
                let mut rec = vec![d.to_string(), (h + 1).to_string()];
                rec.extend(self.values.slice(ndarray::s![i, h, ..]).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, BenchError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "date" || &header[1] != "hour" {
            return Err(BenchError::Format("expected columns date, hour, lear_<window>...".into()));
        }
        let windows = header
            .iter()
            .skip(2)
            .map(|c| c.strip_prefix("lear_").and_then(|w| w.parse().ok()).ok_or_else(|| BenchError::Format(format!("bad column `{c}`"))))
            .collect::<Result<Vec<usize>, _>>()?;
        let mut rows: Vec<(NaiveDate, usize, Vec<f64>)> = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| BenchError::Format(format!("row {}: bad {what}", n + 1));
            let date: NaiveDate = rec[0].parse().map_err(|_| bad("date"))?;
            let hour: usize = rec[1].parse().map_err(|_| bad("hour"))?;
            if hour == 0 {
                return Err(bad("hour"));
            }
            let vals = rec.iter().skip(2).map(|v| v.parse::<f64>().map_err(|_| bad("value"))).collect::<Result<Vec<_>, _>>()?;
            rows.push((date, hour - 1, vals));
        }
        let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.0).collect();
        dates.sort();
        dates.dedup();
        let hours = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != dates.len() * hours {
            return Err(BenchError::Format(format!("{} rows for {} dates x {hours} hours", rows.len(), dates.len())));
        }
        let pos: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let mut values = Array3::from_elem((dates.len(), hours, windows.len()), f64::NAN);
        for (d, h, vals) in rows {
            for (k, v) in vals.into_iter().enumerate() {
                values[[pos[&d], h, k]] = v;
            }
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(BenchError::Format("duplicate or missing (date, hour) rows".into()));
        }
        Self::new(windows, dates, values)
    }
}

/// LEAR forecasts for every hour of `days` and every configured window.
pub fn lear_point_forecasts(panel: &PricePanel, days: &[usize], cfg: &LearConfig) -> Result<PointForecastSet, BenchError> {
    let mut values = Array3::zeros((days.len(), panel.hours(), cfg.windows.len()));
    for (i, &d) in days.iter().enumerate() {
        for (k, &w) in cfg.windows.iter().enumerate() {
            for (h, v) in lear_day(panel, d, w, cfg)?.into_iter().enumerate() {
                values[[i, h, k]] = v;
            }
        }
    }
    PointForecastSet::new(cfg.windows.clone(), days.iter().map(|&d| panel.days[d]).collect(), values)
}
