//! Similar-day naive point forecast and two distributional wrappers around
//! it: a bootstrap of its recent errors and a Gaussian with their sample
//! standard deviation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BenchError;
use crate::dataio::{PricePanel, HISTORY_DAYS};
use crate::stats;

/// Bootstrap draws per forecast.
pub const NAIVE_B_DRAWS: usize = 5000;

/// Monday, Saturday and Sunday repeat the same weekday one week earlier;
/// other days repeat yesterday.
pub fn naive_point(panel: &PricePanel, day: usize, hour: usize) -> Result<f64, BenchError> {
    if day < HISTORY_DAYS {
        return Err(BenchError::InsufficientHistory { day, needed: HISTORY_DAYS });
    }
    let lag = match panel.weekday[day] {
        1 | 6 | 7 => 7,
        _ => 1,
    };
    Ok(panel.prices[[day - lag, hour]])
}

/// Realized errors `price - naive` over the `window` days before `day`,
/// skipping days without enough history for a naive forecast.
pub fn naive_errors(panel: &PricePanel, day: usize, hour: usize, window: usize) -> Vec<f64> {
    (day.saturating_sub(window).max(HISTORY_DAYS)..day)
        .map(|s| panel.prices[[s, hour]] - naive_point(panel, s, hour).expect("history checked"))
        .collect()
}

fn check_levels(levels: &[f64]) -> Result<(), BenchError> {
    match levels.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        Some(&a) => Err(BenchError::BadLevel(a)),
        None => Ok(()),
    }
}

/// Naive point plus `draws` errors resampled with replacement from the
/// window; returns interpolated sample quantiles at `levels`.
pub fn naive_b_forecast(
    panel: &PricePanel,
    day: usize,
    hour: usize,
    window: usize,
    draws: usize,
    seed: u64,
    levels: &[f64],
) -> Result<Vec<f64>, BenchError> {
    check_levels(levels)?;
    let point = naive_point(panel, day, hour)?;
    let errors = naive_errors(panel, day, hour, window);
    if errors.is_empty() {
        return Err(BenchError::InsufficientHistory { day, needed: HISTORY_DAYS + 1 });
    }
    Ok(bootstrap_quantiles(point, &errors, draws, seed, levels))
}

/// Interpolated quantiles of `point + e` for `draws` errors `e` drawn with
/// replacement from `errors` (non-empty).
pub fn bootstrap_quantiles(point: f64, errors: &[f64], draws: usize, seed: u64, levels: &[f64]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<f64> = (0..draws.max(1)).map(|_| point + errors[rng.random_range(0..errors.len())]).collect();
    stats::quantiles(&sample, levels)
}

/// `point + sd z_alpha` at each level.
pub fn normal_band(point: f64, sd: f64, levels: &[f64]) -> Vec<f64> {
    levels.iter().map(|&a| point + sd * stats::normal_quantile(a)).collect()
}

/// Naive point plus a normal error with the sample standard deviation of a
/// full window of realized errors.
pub fn naive_normal_forecast(
    panel: &PricePanel,
    day: usize,
    hour: usize,
    window: usize,
    levels: &[f64],
) -> Result<Vec<f64>, BenchError> {
    check_levels(levels)?;
    let point = naive_point(panel, day, hour)?;
    let errors = naive_errors(panel, day, hour, window);
    if errors.len() < window.max(2) {
        return Err(BenchError::InsufficientHistory { day, needed: HISTORY_DAYS + window.max(2) });
    }
    Ok(normal_band(point, stats::sample_sd(&errors), levels))
}
