//! Long-format quantile files: one `date,hour,alpha,value` record per level.
//! Hours are 1-based in files and 0-based in memory.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CdfError;

/// Predictive quantiles for one (day, hour).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub date: NaiveDate,
    /// Zero-based hour index.
    pub hour: usize,
    pub values: Vec<f64>,
}

impl QuantileForecast {
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    date: NaiveDate,
    hour: usize,
    alpha: f64,
    value: f64,
}

/// Writes forecasts in the order given.
pub fn write_quantile_csv<W: Write>(out: W, forecasts: &[QuantileForecast], levels: &[f64]) -> Result<(), CdfError> {
    let mut w = csv::Writer::from_writer(out);
    for f in forecasts {
        if f.values.len() != levels.len() {
            return Err(CdfError::Length { what: "forecast values", got: f.values.len(), expected: levels.len() });
        }
        for (&alpha, &value) in levels.iter().zip(&f.values) {
            w.serialize(Record { date: f.date, hour: f.hour + 1, alpha, value })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a quantile file, requiring every (date, hour) to carry exactly
/// `levels` in order and to be non-decreasing. Output is sorted by
/// (date, hour).
pub fn read_quantile_csv<R: Read>(input: R, levels: &[f64]) -> Result<Vec<QuantileForecast>, CdfError> {
    let mut groups: BTreeMap<(NaiveDate, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for (i, rec) in csv::Reader::from_reader(input).deserialize::<Record>().enumerate() {
        let rec = rec?;
        if rec.hour == 0 {
            return Err(CdfError::Format(format!("record {}: hours are 1-based", i + 1)));
        }
        if !rec.value.is_finite() {
            return Err(CdfError::Format(format!("record {}: non-finite value", i + 1)));
        }
        groups.entry((rec.date, rec.hour - 1)).or_default().push((rec.alpha, rec.value));
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((date, hour), recs) in groups {
        if recs.len() != levels.len() {
            return Err(CdfError::Format(format!(
                "{date} hour {}: {} levels, expected {}",
                hour + 1,
                recs.len(),
                levels.len()
            )));
        }
        let mut values = Vec::with_capacity(recs.len());
        for (j, ((alpha, value), &level)) in recs.into_iter().zip(levels).enumerate() {
            if (alpha - level).abs() > 1e-9 {
                return Err(CdfError::Format(format!("{date} hour {}: level {alpha} where {level} expected", hour + 1)));
            }
            if j > 0 && value < values[j - 1] {
                return Err(CdfError::NonMonotone { date, hour: hour + 1, alpha });
            }
            values.push(value);
        }
        out.push(QuantileForecast { date, hour, values });
    }
    Ok(out)
}
