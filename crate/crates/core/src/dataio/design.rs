use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use chrono::{Days, NaiveDate};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{winsor_bounds, DataError, PricePanel};
use crate::cdftools::{unconditional_quantiles, QuantileTable};
use crate::transform::TransformState;

/// Days of history a design row needs (the longest lag).
pub const HISTORY_DAYS: usize = 7;
const PRICE_LAGS: [usize; 4] = [1, 2, 3, 7];
const LOAD_LAGS: [usize; 3] = [0, 1, 7];
const RES_LAGS: [usize; 2] = [0, 1];
const FUEL_LAG: usize = 2;
const DESIGN_CACHE_TAG: &str = "#pricedist-design v1";

/// Column layout of a design row for `hours` hours and `levels` indicators:
///
/// | block | width |
/// |---|---|
/// | prices at lags 1, 2, 3, 7 | 4 H |
/// | indicators `1{p[t-1,h] <= q_h^j}` | k |
/// | load forecasts at lags 0, 1, 7 | 3 H |
/// | renewable forecasts at lags 0, 1 | 2 H |
/// | eua, coal, gas, oil at lag 2 | 4 |
/// | weekday 1..7 | 1 |
///
/// With 24 hours and 31 levels the width is 252.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub hours: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Lagged price of the given hour.
    Price { hour: usize },
    Indicator,
    Exogenous,
    Weekday,
}

impl DesignLayout {
    pub fn new(hours: usize, levels: usize) -> Self {
        Self { hours, levels }
    }

    pub fn width(&self) -> usize {
        9 * self.hours + self.levels + 5
    }

    pub fn prices(&self) -> Range<usize> {
        0..4 * self.hours
    }

    pub fn indicators(&self) -> Range<usize> {
        let s = 4 * self.hours;
        s..s + self.levels
    }

    pub fn load(&self) -> Range<usize> {
        let s = self.indicators().end;
        s..s + 3 * self.hours
    }

    pub fn res(&self) -> Range<usize> {
        let s = self.load().end;
        s..s + 2 * self.hours
    }

    pub fn fuels(&self) -> Range<usize> {
        let s = self.res().end;
        s..s + 4
    }

    pub fn weekday(&self) -> usize {
        self.fuels().end
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        if self.prices().contains(&col) {
            ColumnKind::Price { hour: col % self.hours }
        } else if self.indicators().contains(&col) {
            ColumnKind::Indicator
        } else if col == self.weekday() {
            ColumnKind::Weekday
        } else {
            ColumnKind::Exogenous
        }
    }

    /// Writes every block except the indicators, which depend on the hour.
    fn fill_common(&self, panel: &PricePanel, t: usize, row: &mut [f64]) {
        let h = self.hours;
        for (b, lag) in PRICE_LAGS.iter().enumerate() {
            row[b * h..(b + 1) * h].iter_mut().zip(panel.prices.row(t - lag)).for_each(|(r, &v)| *r = v);
        }
        let s = self.load().start;
        for (b, lag) in LOAD_LAGS.iter().enumerate() {
            row[s + b * h..s + (b + 1) * h].iter_mut().zip(panel.load_fc.row(t - lag)).for_each(|(r, &v)| *r = v);
        }
        let s = self.res().start;
        for (b, lag) in RES_LAGS.iter().enumerate() {
            row[s + b * h..s + (b + 1) * h].iter_mut().zip(panel.res_fc.row(t - lag)).for_each(|(r, &v)| *r = v);
        }
        let f = self.fuels().start;
        let d = t - FUEL_LAG;
        row[f..f + 4].copy_from_slice(&[panel.eua[d], panel.coal[d], panel.gas[d], panel.oil[d]]);
        row[self.weekday()] = f64::from(panel.weekday[t]);
    }
}

/// Unscaled features for one (day, hour) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub features: Vec<f64>,
    pub day: NaiveDate,
    /// Zero-based hour index.
    pub hour: usize,
}

fn check_history(panel: &PricePanel, t: usize) -> Result<(), DataError> {
    if t < HISTORY_DAYS {
        let earliest = panel.days[0].checked_add_days(Days::new(HISTORY_DAYS as u64)).unwrap_or(panel.days[0]);
        return Err(DataError::InsufficientHistory { day: panel.days[t.min(panel.n_days() - 1)], earliest });
    }
    Ok(())
}

/// Raw design row for day index `t` and zero-based `hour`.
pub fn build_design_row(panel: &PricePanel, table: &QuantileTable, t: usize, hour: usize) -> Result<DesignRow, DataError> {
    if t >= panel.n_days() || hour >= panel.hours() || table.hours() != panel.hours() {
        return Err(DataError::Shape(format!(
            "day {t} / hour {hour} outside a panel of {} days x {} hours (table has {} hours)",
            panel.n_days(),
            panel.hours(),
            table.hours()
        )));
    }
    check_history(panel, t)?;
    let layout = DesignLayout::new(panel.hours(), table.levels.len());
    let mut features = vec![0.0; layout.width()];
    layout.fill_common(panel, t, &mut features);
    let ind = table.indicators(hour, panel.prices[[t - 1, hour]]);
    features[layout.indicators()].copy_from_slice(&ind);
    Ok(DesignRow { features, day: panel.days[t], hour })
}

/// Clamp and z-score parameters of one exogenous column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Maps raw design rows to network inputs: lagged prices are clamped to the
/// window's per-hour bounds and asinh-transformed; exogenous columns and the
/// weekday are clamped and z-scored; indicators pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub layout: DesignLayout,
    pub price_bounds: Vec<(f64, f64)>,
    pub transform: TransformState<f64>,
    /// One entry per column; `None` for price and indicator columns.
    pub columns: Vec<Option<ColumnScale>>,
}

impl FeatureScaler {
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(c, &v)| match (self.layout.kind(c), &self.columns[c]) {
                (ColumnKind::Price { hour }, _) => {
                    let (lo, hi) = self.price_bounds[hour];
                    self.transform.forward(v.clamp(lo, hi))
                }
                (ColumnKind::Indicator, _) => v,
                (_, Some(s)) => (v.clamp(s.lo, s.hi) - s.mean) / s.sd,
                (_, None) => v,
            })
            .collect()
    }
}

/// Everything fitted on one training window and held fixed until the next
/// full retrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    pub window: Range<usize>,
    pub table: QuantileTable,
    /// Per-hour tail anchors for CDF inversion (winsorized window extremes).
    pub anchors: Vec<(f64, f64)>,
    pub scaler: FeatureScaler,
}

impl WindowState {
    /// Fits support table, transform, anchors and scaler on the days in `window`.
    pub fn fit(panel: &PricePanel, window: Range<usize>, levels: &[f64], proportion: f64) -> Result<Self, DataError> {
        if window.is_empty() || window.end > panel.n_days() {
            return Err(DataError::Shape(format!("window {window:?} outside a panel of {} days", panel.n_days())));
        }
        let hours = panel.hours();
        let mut bounds = Vec::with_capacity(hours);
        let mut clamped: Vec<Vec<f64>> = Vec::with_capacity(hours);
        for h in 0..hours {
            let raw = panel.hour_prices(h, window.clone());
            let (lo, hi) = winsor_bounds(&raw, proportion)?;
            bounds.push((lo, hi));
            clamped.push(raw.iter().map(|v| v.clamp(lo, hi)).collect());
        }
        let table = unconditional_quantiles(&clamped, levels)?;
        let pooled: Vec<f64> = clamped.iter().flatten().copied().collect();
        let transform = TransformState::fit(&pooled)?;

        let layout = DesignLayout::new(hours, levels.len());
        let rows: Vec<usize> = window.clone().filter(|&t| t >= HISTORY_DAYS).collect();
        if rows.is_empty() {
            check_history(panel, window.start)?;
        }
        let mut raw = vec![vec![0.0; layout.width()]; rows.len()];
        for (r, &t) in raw.iter_mut().zip(&rows) {
            layout.fill_common(panel, t, r);
        }
        let mut columns = vec![None; layout.width()];
        for (c, slot) in columns.iter_mut().enumerate() {
            if matches!(layout.kind(c), ColumnKind::Exogenous | ColumnKind::Weekday) {
                let col: Vec<f64> = raw.iter().map(|r| r[c]).collect();
                let (lo, hi) = winsor_bounds(&col, proportion)?;
                let kept: Vec<f64> = col.iter().map(|v| v.clamp(lo, hi)).collect();
                let mean = crate::stats::mean(&kept);
                let sd = crate::stats::sample_sd(&kept);
                *slot = Some(ColumnScale { lo, hi, mean, sd: if sd > 0.0 { sd } else { 1.0 } });
            }
        }
        let scaler = FeatureScaler { layout, price_bounds: bounds.clone(), transform, columns };
        Ok(Self { window, table, anchors: bounds, scaler })
    }

    pub fn layout(&self) -> DesignLayout {
        self.scaler.layout
    }

    pub fn transform(&self) -> &TransformState<f64> {
        &self.scaler.transform
    }
}

/// Scaled network inputs for `days` at `hour`, one row per day.
pub fn design_matrix(panel: &PricePanel, state: &WindowState, days: &[usize], hour: usize) -> Result<Array2<f64>, DataError> {
    let width = state.layout().width();
    let mut out = Array2::zeros((days.len(), width));
    for (mut row, &t) in out.outer_iter_mut().zip(days) {
        let raw = build_design_row(panel, &state.table, t, hour)?;
        row.assign(&ndarray::ArrayView1::from(&state.scaler.apply(&raw.features)));
    }
    Ok(out)
}

/// Indicator targets `1{p[t, hour] <= q_hour^j}` for `days`.
pub fn targets_matrix(panel: &PricePanel, state: &WindowState, days: &[usize], hour: usize) -> Array2<f64> {
    let k = state.table.levels.len();
    let support = state.table.support(hour);
    Array2::from_shape_fn((days.len(), k), |(r, j)| if panel.prices[[days[r], hour]] <= support[j] { 1.0 } else { 0.0 })
}

impl DesignRow {
    /// Version-tagged CSV cache of raw rows: `day,hour,f0,...` (hour 1-based).
    pub fn write_cache<W: Write>(rows: &[DesignRow], mut out: W) -> Result<(), DataError> {
        let width = rows.first().map_or(0, |r| r.features.len());
        writeln!(out, "{DESIGN_CACHE_TAG} width={width}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["day".to_string(), "hour".to_string()];
        header.extend((0..width).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for r in rows {
            if r.features.len() != width {
                return Err(DataError::Shape(format!("row width {} differs from {width}", r.features.len())));
            }
            let mut rec = vec![r.day.to_string(), (r.hour + 1).to_string()];
            rec.extend(r.features.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache<R: Read>(input: R) -> Result<Vec<DesignRow>, DataError> {
        let mut reader = BufReader::new(input);
        let mut tag = String::new();
        reader.read_line(&mut tag)?;
        let width = tag
            .trim_end()
            .strip_prefix(DESIGN_CACHE_TAG)
            .and_then(|rest| rest.trim().strip_prefix("width="))
            .and_then(|w| w.parse::<usize>().ok())
            .ok_or_else(|| DataError::Cache(format!("unrecognized cache tag `{}`", tag.trim_end())))?;
        let mut rows = Vec::new();
        for (i, rec) in csv::Reader::from_reader(reader).records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| DataError::Cache(format!("row {}: bad {what}", i + 1));
            let day = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| bad("day"))?;
            let hour: usize = rec[1].parse().map_err(|_| bad("hour"))?;
            let features: Vec<f64> = rec.iter().skip(2).map(|c| c.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("feature"))?;
            if features.len() != width || hour == 0 {
                return Err(bad("width or hour"));
            }
            rows.push(DesignRow { features, day, hour: hour - 1 });
        }
        Ok(rows)
    }
}
