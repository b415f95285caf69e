use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{dm_test, DmMode, DmOutcome, DmResult, EvalError, LossPanel, Sided};

/// Named inclusive date range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subperiod {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Comparison tables over the days common to all models.
///
/// DM cells `[i][j]` test the differential `L_i - L_j` one-sided, so a
/// small p-value means model `j` beats model `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<String>,
    pub days: usize,
    /// Column names: every subperiod, then `all`.
    pub periods: Vec<String>,
    /// `[model][period]` mean CRPS; `None` when a subperiod has no common days.
    pub crps: Vec<Vec<Option<f64>>>,
    /// `[model][hour]` mean CRPS.
    pub hourly_crps: Vec<Vec<f64>>,
    /// `[i][j]` daily DM outcome; `None` on the diagonal. Empty for one model.
    pub dm: Vec<Vec<Option<DmOutcome>>>,
    /// `(i, j, per-hour outcomes)` for every ordered pair.
    pub hourly_dm: Vec<(usize, usize, Vec<DmOutcome>)>,
}

/// Builds the tables. DM tests need at least the minimum number of common days;
/// with fewer, DM tables are left empty.
pub fn report(models: &[LossPanel], subperiods: &[Subperiod]) -> Result<EvalReport, EvalError> {
    let first = models.first().ok_or(EvalError::Empty("models"))?;
    if models.iter().any(|m| m.hours() != first.hours() || m.level_set != first.level_set) {
        return Err(EvalError::Misaligned("models differ in hours or level set".into()));
    }
    let mut common: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for m in &models[1..] {
        let d: BTreeSet<NaiveDate> = m.dates.iter().copied().collect();
        common = common.intersection(&d).copied().collect();
    }
    if common.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let aligned: Vec<LossPanel> = models.iter().map(|m| m.restrict(&dates)).collect::<Result<_, _>>()?;

    let mut periods: Vec<String> = subperiods.iter().map(|s| s.name.clone()).collect();
    periods.push("all".into());
    let crps = aligned
        .iter()
        .map(|m| {
            let mut row: Vec<Option<f64>> = subperiods
                .iter()
                .map(|s| {
                    let rows: Vec<usize> = (0..dates.len()).filter(|&i| dates[i] >= s.start && dates[i] <= s.end).collect();
                    (!rows.is_empty()).then(|| m.losses.select(ndarray::Axis(0), &rows).mean().unwrap_or(f64::NAN))
                })
                .collect();
            row.push(Some(m.mean()));
            row
        })
        .collect();
    let hourly_crps = aligned
        .iter()
        .map(|m| m.losses.mean_axis(ndarray::Axis(0)).map(|a| a.to_vec()).unwrap_or_default())
        .collect();

    let n = aligned.len();
    let mut dm = Vec::new();
    let mut hourly_dm = Vec::new();
    if n > 1 && dates.len() >= super::MIN_DM_DAYS {
        dm = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let DmResult::Daily(o) = dm_test(&aligned[i], &aligned[j], DmMode::Daily, Sided::One)? {
                    dm[i][j] = Some(o);
                }
                if let DmResult::PerHour(v) = dm_test(&aligned[i], &aligned[j], DmMode::PerHour, Sided::One)? {
                    hourly_dm.push((i, j, v));
                }
            }
        }
    }
    Ok(EvalReport {
        models: aligned.iter().map(|m| m.model.clone()).collect(),
        days: dates.len(),
        periods,
        crps,
        hourly_crps,
        dm,
        hourly_dm,
    })
}

fn cell(o: &Option<DmOutcome>) -> String {
    match o {
        None => "-".into(),
        Some(DmOutcome::Indeterminate) => "indeterminate".into(),
        Some(DmOutcome::Test { p_value, .. }) => p_value.to_string(),
    }
}

fn short_cell(o: &Option<DmOutcome>) -> String {
    match o {
        None => "-".into(),
        Some(DmOutcome::Indeterminate) => "indet.".into(),
        Some(DmOutcome::Test { p_value, .. }) => format!("{p_value:.4}"),
    }
}

impl EvalReport {
    /// `model,<period>...` mean CRPS.
    pub fn crps_csv(&self) -> String {
        let mut s = format!("model,{}\n", self.periods.join(","));
        for (m, row) in self.models.iter().zip(&self.crps) {
            let cells: Vec<String> = row.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())).collect();
            let _ = writeln!(s, "{m},{}", cells.join(","));
        }
        s
    }

    /// `model,h1..hH` mean CRPS per hour.
    pub fn hourly_crps_csv(&self) -> String {
        let hours = self.hourly_crps.first().map_or(0, Vec::len);
        let mut s = String::from("model");
        for h in 1..=hours {
            let _ = write!(s, ",h{h}");
        }
        s.push('\n');
        for (m, row) in self.models.iter().zip(&self.hourly_crps) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{m},{}", cells.join(","));
        }
        s
    }

    /// Daily DM p-value matrix; rows are the first model of the differential.
    pub fn dm_csv(&self) -> String {
        if self.dm.is_empty() {
            return String::new();
        }
        let mut s = format!("model,{}\n", self.models.join(","));
        for (m, row) in self.models.iter().zip(&self.dm) {
            let cells: Vec<String> = row.iter().map(cell).collect();
            let _ = writeln!(s, "{m},{}", cells.join(","));
        }
        s
    }

    /// `model_a,model_b,hour,p_value` per-hour DM outcomes.
    pub fn hourly_dm_csv(&self) -> String {
        if self.hourly_dm.is_empty() {
            return String::new();
        }
        let mut s = String::from("model_a,model_b,hour,p_value\n");
        for (i, j, v) in &self.hourly_dm {
            for (h, o) in v.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", self.models[*i], self.models[*j], h + 1, cell(&Some(*o)));
            }
        }
        s
    }

    /// Aligned plain-text rendering of the CRPS and daily DM tables.
    pub fn text(&self) -> String {
        let width = self.models.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut s = format!("Mean CRPS over {} common days\n", self.days);
        let _ = write!(s, "{:<width$}", "model");
        for p in &self.periods {
            let _ = write!(s, " {p:>12}");
        }
        s.push('\n');
        for (m, row) in self.models.iter().zip(&self.crps) {
            let _ = write!(s, "{m:<width$}");
            for v in row {
                match v {
                    Some(x) => {
                        let _ = write!(s, " {x:>12.4}");
                    }
                    None => {
                        let _ = write!(s, " {:>12}", "-");
                    }
                }
            }
            s.push('\n');
        }
        if !self.dm.is_empty() {
            s.push_str("\nDaily DM p-values (row loss minus column loss, one-sided)\n");
            let _ = write!(s, "{:<width$}", "");
            for m in &self.models {
                let _ = write!(s, " {m:>13}");
            }
            s.push('\n');
            for (m, row) in self.models.iter().zip(&self.dm) {
                let _ = write!(s, "{m:<width$}");
                for c in row {
                    let _ = write!(s, " {:>13}", short_cell(c));
                }
                s.push('\n');
            }
        }
        s
    }
}
