use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DataError, PricePanel};

/// Default length of the quantile-regression calibration window.
pub const DEFAULT_CALIBRATION_DAYS: usize = 182;

/// One out-of-sample day and the training window preceding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub test_day: usize,
    pub date: NaiveDate,
    /// Training plus validation days; always ends at `test_day`.
    pub window: Range<usize>,
    pub subperiod: usize,
    /// First day of a subperiod: fit a fresh model and refit window state.
    pub retrain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSchedule {
    pub entries: Vec<ScheduleEntry>,
    pub window_len: usize,
    pub calibration_len: usize,
}

impl WindowSchedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subperiods(&self) -> usize {
        self.entries.last().map_or(0, |e| e.subperiod + 1)
    }
}

/// Daily rolling schedule over `[oos_start, oos_end]` with a window of
/// `window_len` days. `subperiod_bounds` are the first days of later
/// subperiods; the first OOS day always opens one.
pub fn make_schedule(
    panel: &PricePanel,
    window_len: usize,
    oos_start: NaiveDate,
    oos_end: NaiveDate,
    subperiod_bounds: &[NaiveDate],
) -> Result<WindowSchedule, DataError> {
    if window_len == 0 {
        return Err(DataError::Schedule("window length must be positive".into()));
    }
    if oos_end < oos_start {
        return Err(DataError::Schedule(format!("OOS end {oos_end} precedes start {oos_start}")));
    }
    let first = panel.require_index(oos_start)?;
    let last = panel.require_index(oos_end)?;
    if first < window_len {
        return Err(DataError::Schedule(format!(
            "insufficient history: {window_len} days needed before {oos_start}, panel has {first}"
        )));
    }
    let mut starts: Vec<usize> = Vec::with_capacity(subperiod_bounds.len());
    for &b in subperiod_bounds {
        if b < oos_start || b > oos_end {
            return Err(DataError::Schedule(format!("subperiod bound {b} outside [{oos_start}, {oos_end}]")));
        }
        starts.push(panel.require_index(b)?);
    }
    starts.push(first);
    starts.sort_unstable();
    starts.dedup();

    let mut subperiod = 0;
    let entries = (first..=last)
        .map(|t| {
            let retrain = starts.binary_search(&t).is_ok();
            if retrain && t != first {
                subperiod += 1;
            }
            ScheduleEntry { test_day: t, date: panel.days[t], window: t - window_len..t, subperiod, retrain }
        })
        .collect();
    Ok(WindowSchedule { entries, window_len, calibration_len: DEFAULT_CALIBRATION_DAYS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;
    use ndarray::Array2;

    fn panel(n: usize) -> PricePanel {
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let days: Vec<NaiveDate> = (0..n).map(|i| start.checked_add_days(Days::new(i as u64)).unwrap()).collect();
        let m = Array2::from_elem((n, 1), 1.0);
        PricePanel::new(days, m.clone(), m.clone(), m, vec![1.0; n], vec![1.0; n], vec![1.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn toy_ten_days_window_five() {
        let p = panel(10);
        let s = make_schedule(&p, 5, p.days[5], p.days[9], &[]).unwrap();
        assert_eq!(s.len(), 5);
        for (i, e) in s.entries.iter().enumerate() {
            assert_eq!(e.window, i..i + 5);
            assert_eq!(e.test_day, i + 5);
            assert!(e.window.end <= e.test_day);
        }
        assert!(s.entries[0].retrain && s.entries[1..].iter().all(|e| !e.retrain));
    }

    #[test]
    fn full_length_oos_period() {
        let p = panel(1440 + 1649);
        let s = make_schedule(&p, 1440, p.days[1440], p.days[1440 + 1648], &[p.days[1800], p.days[2200], p.days[2600]]).unwrap();
        assert_eq!(s.len(), 1649);
        assert_eq!(s.subperiods(), 4);
        assert_eq!(s.entries.iter().filter(|e| e.retrain).count(), 4);
        assert!(s.entries.iter().all(|e| e.window.len() == 1440 && e.window.end == e.test_day));
    }

    #[test]
    fn single_day_and_errors() {
        let p = panel(20);
        assert_eq!(make_schedule(&p, 5, p.days[12], p.days[12], &[]).unwrap().len(), 1);
        assert!(matches!(make_schedule(&p, 15, p.days[10], p.days[12], &[]), Err(DataError::Schedule(_))));
        assert!(matches!(make_schedule(&p, 5, p.days[10], p.days[12], &[p.days[15]]), Err(DataError::Schedule(_))));
    }
}
