//! Quantile regression averaging of point forecasts: each level is a linear
//! quantile regression of realized prices on the individual point forecasts
//! (QRA) or on their mean (QRM) over the preceding calibration days.

use ndarray::{Array1, Array2};

use super::qr::quantile_regression_fit;
use super::{BenchError, PointForecastSet};
use crate::dataio::PricePanel;

fn regress(rows: &[Vec<f64>], y: &[f64], target: &[f64], levels: &[f64]) -> Result<Vec<f64>, BenchError> {
    let p = target.len() + 1;
    let x = Array2::from_shape_fn((rows.len(), p), |(i, j)| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = Array1::from(y.to_vec());
    let mut xt = vec![1.0];
    xt.extend_from_slice(target);
    let xt = Array1::from(xt);
    let mut out = levels
        .iter()
        .map(|&a| quantile_regression_fit(x.view(), y.view(), a).map(|f| f.predict(xt.view())))
        .collect::<Result<Vec<f64>, _>>()?;
    // Separately fitted levels can cross; sorting restores a valid set.
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Calibration rows for the `calib` days before `day`: point forecasts and
/// realized prices, plus the point forecasts for `day` itself.
fn calibration(
    points: &PointForecastSet,
    panel: &PricePanel,
    day: usize,
    hour: usize,
    calib: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>), BenchError> {
    if day < calib || day >= panel.n_days() {
        return Err(BenchError::InsufficientHistory { day, needed: calib });
    }
    let lookup = |d: usize| {
        let date = panel.days[d];
        points.get(date, hour).ok_or(BenchError::MissingPoint { date, hour })
    };
    let rows = (day - calib..day).map(lookup).collect::<Result<Vec<_>, _>>()?;
    let y = (day - calib..day).map(|d| panel.prices[[d, hour]]).collect();
    Ok((rows, y, lookup(day)?))
}

/// QRA quantiles at `levels`, sorted ascending.
pub fn qra_forecast(
    points: &PointForecastSet,
    panel: &PricePanel,
    day: usize,
    hour: usize,
    calib: usize,
    levels: &[f64],
) -> Result<Vec<f64>, BenchError> {
    let (rows, y, target) = calibration(points, panel, day, hour, calib)?;
    regress(&rows, &y, &target, levels).map_err(|e| e.context("qra", panel.days[day], hour, None))
}

/// QRM quantiles at `levels`: regression on the mean point forecast.
pub fn qrm_forecast(
    points: &PointForecastSet,
    panel: &PricePanel,
    day: usize,
    hour: usize,
    calib: usize,
    levels: &[f64],
) -> Result<Vec<f64>, BenchError> {
    let (rows, y, target) = calibration(points, panel, day, hour, calib)?;
    let mean = |v: &Vec<f64>| vec![crate::stats::mean(v)];
    let rows: Vec<Vec<f64>> = rows.iter().map(mean).collect();
    regress(&rows, &y, &mean(&target), levels).map_err(|e| e.context("qrm", panel.days[day], hour, None))
}
