use serde::{Deserialize, Serialize};

use super::{EvalError, LossPanel};
use crate::stats;

/// Minimum number of days for a DM test.
pub const MIN_DM_DAYS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DmMode {
    /// One differential per day from the day-summed losses.
    Daily,
    /// One test per hour.
    PerHour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    /// H0: E[loss A - loss B] <= 0; small p means B is more accurate.
    One,
    /// H0: E[loss A - loss B] = 0.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DmOutcome {
    Test { statistic: f64, p_value: f64 },
    /// The long-run variance is zero: the differentials are constant.
    Indeterminate,
}

impl DmOutcome {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            DmOutcome::Test { p_value, .. } => Some(*p_value),
            DmOutcome::Indeterminate => None,
        }
    }

    pub fn statistic(&self) -> Option<f64> {
        match self {
            DmOutcome::Test { statistic, .. } => Some(*statistic),
            DmOutcome::Indeterminate => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DmResult {
    Daily(DmOutcome),
    PerHour(Vec<DmOutcome>),
}

/// Bartlett truncation lag `floor(T^(1/3))`.
pub fn nw_lag(t: usize) -> usize {
    let mut l = (t as f64).cbrt().floor() as usize;
    // Guard against cbrt rounding just below an exact cube.
    while (l + 1).pow(3) <= t {
        l += 1;
    }
    l
}

/// Newey–West long-run variance with Bartlett weights `1 - k/(L+1)` and
/// autocovariances normalized by `T`.
pub fn newey_west_variance(d: &[f64], lag: usize) -> f64 {
    let t = d.len();
    let mean = stats::mean(d);
    let gamma = |k: usize| (k..t).map(|i| (d[i] - mean) * (d[i - k] - mean)).sum::<f64>() / t as f64;
    let mut lrv = gamma(0);
    for k in 1..=lag.min(t.saturating_sub(1)) {
        lrv += 2.0 * (1.0 - k as f64 / (lag + 1) as f64) * gamma(k);
    }
    lrv
}

/// DM test on a differential series.
pub fn dm_series(d: &[f64], sided: Sided) -> Result<DmOutcome, EvalError> {
    if d.len() < MIN_DM_DAYS {
        return Err(EvalError::TooShort { needed: MIN_DM_DAYS, got: d.len() });
    }
    let t = d.len() as f64;
    let lrv = newey_west_variance(d, nw_lag(d.len()));
    let scale = d.iter().map(|v| v * v).sum::<f64>() / t;
    if !lrv.is_finite() || lrv <= 1e-14 * scale || lrv <= 0.0 {
        return Ok(DmOutcome::Indeterminate);
    }
    let statistic = stats::mean(d) / (lrv / t).sqrt();
    let p_value = match sided {
        Sided::One => 1.0 - stats::normal_cdf(statistic),
        Sided::Two => 2.0 * (1.0 - stats::normal_cdf(statistic.abs())),
    };
    Ok(DmOutcome::Test { statistic, p_value })
}

/// Diebold–Mariano test of `a` against `b` on differentials `L_a - L_b`.
pub fn dm_test(a: &LossPanel, b: &LossPanel, mode: DmMode, sided: Sided) -> Result<DmResult, EvalError> {
    if a.dates != b.dates || a.hours() != b.hours() {
        return Err(EvalError::Misaligned(format!("{} vs {}", a.model, b.model)));
    }
    let diff = &a.losses - &b.losses;
    match mode {
        DmMode::Daily => {
            let d: Vec<f64> = diff.rows().into_iter().map(|r| r.sum()).collect();
            Ok(DmResult::Daily(dm_series(&d, sided)?))
        }
        DmMode::PerHour => {
            let out = diff.columns().into_iter().map(|c| dm_series(&c.to_vec(), sided)).collect::<Result<_, _>>()?;
            Ok(DmResult::PerHour(out))
        }
    }
}
