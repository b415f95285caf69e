//! Benchmark forecasts over the out-of-sample days of a schedule.

use ndarray::Array3;
use pricedist_core::benchmarks::lear::{lear_day, LearConfig};
use pricedist_core::benchmarks::{naive_b_forecast, naive_normal_forecast, qra_forecast, qrm_forecast, BenchError, PointForecastSet};
use pricedist_core::cdftools::{forecast_levels, QuantileForecast};
use pricedist_core::dataio::{PricePanel, WindowSchedule};
use rayon::prelude::*;

use crate::config::BenchSection;
use crate::{seeds, HarnessError};

pub const BENCH_MODELS: [&str; 4] = ["naive_b", "naive_1n", "qra", "qrm"];

#[derive(Debug, Clone)]
pub struct BenchOutputs {
    /// Quantile forecasts in [`BENCH_MODELS`] order.
    pub quantiles: Vec<(String, Vec<QuantileForecast>)>,
    /// LEAR points for the calibration days and the out-of-sample days.
    pub points: PointForecastSet,
}

/// LEAR points for the days preceding the first test day that quantile
/// regression calibrates on, then every test day.
pub fn lear_points(panel: &PricePanel, schedule: &WindowSchedule, bench: &BenchSection) -> Result<PointForecastSet, HarnessError> {
    let first = schedule.entries.first().ok_or_else(|| HarnessError::Config("empty schedule".into()))?.test_day;
    let last = schedule.entries.last().expect("non-empty").test_day;
    if first < bench.calibration {
        return Err(BenchError::InsufficientHistory { day: first, needed: bench.calibration }.into());
    }
    let days: Vec<usize> = (first - bench.calibration..=last).collect();
    let cfg = LearConfig { windows: bench.lear_windows.clone(), n_lambdas: bench.lear_lambdas, folds: bench.lear_folds };
    let per_day: Vec<Vec<Vec<f64>>> = days
        .par_iter()
        .map(|&d| cfg.windows.iter().map(|&w| lear_day(panel, d, w, &cfg)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let hours = panel.hours();
    let values = Array3::from_shape_fn((days.len(), hours, cfg.windows.len()), |(i, h, k)| per_day[i][k][h]);
    Ok(PointForecastSet::new(cfg.windows.clone(), days.iter().map(|&d| panel.days[d]).collect(), values)?)
}

pub fn run_benchmarks(panel: &PricePanel, schedule: &WindowSchedule, bench: &BenchSection, seed: u64) -> Result<BenchOutputs, HarnessError> {
    let levels = forecast_levels();
    let points = lear_points(panel, schedule, bench)?;
    let hours = panel.hours();
    let cells: Vec<(usize, usize)> = schedule.entries.iter().flat_map(|e| (0..hours).map(move |h| (e.test_day, h))).collect();
    let ctx = |model: &'static str, d: usize, h: usize| {
        let date = panel.days[d];
        move |e: BenchError| e.context(model, date, h, None)
    };
    let rows: Vec<[Vec<f64>; 4]> = cells
        .par_iter()
        .map(|&(d, h)| -> Result<[Vec<f64>; 4], BenchError> {
            let s = seeds::derive(seed, "naive_b", &[d as u64, h as u64]);
            Ok([
                naive_b_forecast(panel, d, h, bench.calibration, bench.naive_draws, s, &levels).map_err(ctx("naive_b", d, h))?,
                naive_normal_forecast(panel, d, h, bench.calibration, &levels).map_err(ctx("naive_1n", d, h))?,
                qra_forecast(&points, panel, d, h, bench.calibration, &levels)?,
                qrm_forecast(&points, panel, d, h, bench.calibration, &levels)?,
            ])
        })
        .collect::<Result<_, _>>()?;
    let quantiles = BENCH_MODELS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let list = cells
                .iter()
                .zip(&rows)
                .map(|(&(d, h), r)| QuantileForecast { date: panel.days[d], hour: h, values: r[k].clone() })
                .collect();
            (name.to_string(), list)
        })
        .collect();
    Ok(BenchOutputs { quantiles, points })
}
