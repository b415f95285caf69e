use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DataError;

const DATE_FORMAT: &str = "%Y-%m-%d";
const CACHE_TAG: &str = "#pricedist-panel v1";

/// Column names of a wide panel file. Hourly columns are
/// `<prefix><hour>` with 1-based hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    pub date: String,
    pub price_prefix: String,
    pub load_prefix: String,
    pub res_prefix: String,
    pub eua: String,
    pub coal: String,
    pub gas: String,
    pub oil: String,
    pub hours: usize,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self::with_hours(24)
    }
}

impl PanelSchema {
    pub fn with_hours(hours: usize) -> Self {
        Self {
            date: "date".into(),
            price_prefix: "price_".into(),
            load_prefix: "load_".into(),
            res_prefix: "res_".into(),
            eua: "eua".into(),
            coal: "coal".into(),
            gas: "gas".into(),
            oil: "oil".into(),
            hours,
        }
    }

    /// Header in file order.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.date.clone()];
        for prefix in [&self.price_prefix, &self.load_prefix, &self.res_prefix] {
            h.extend((1..=self.hours).map(|i| format!("{prefix}{i}")));
        }
        h.extend([self.eua.clone(), self.coal.clone(), self.gas.clone(), self.oil.clone()]);
        h
    }
}

/// Daily panel of hourly prices and exogenous series.
///
/// Invariants: every matrix has one row per day, days are consecutive
/// calendar dates, all cells are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub days: Vec<NaiveDate>,
    pub prices: Array2<f64>,
    pub load_fc: Array2<f64>,
    pub res_fc: Array2<f64>,
    pub eua: Vec<f64>,
    pub coal: Vec<f64>,
    pub gas: Vec<f64>,
    pub oil: Vec<f64>,
    /// ISO weekday, Monday = 1 ... Sunday = 7.
    pub weekday: Vec<u8>,
}

impl PricePanel {
    /// Validates shapes, calendar continuity and finiteness; derives weekdays.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        days: Vec<NaiveDate>,
        prices: Array2<f64>,
        load_fc: Array2<f64>,
        res_fc: Array2<f64>,
        eua: Vec<f64>,
        coal: Vec<f64>,
        gas: Vec<f64>,
        oil: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n = days.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let h = prices.ncols();
        for (name, m) in [("prices", &prices), ("load", &load_fc), ("res", &res_fc)] {
            if m.dim() != (n, h) {
                return Err(DataError::Shape(format!("{name} is {:?}, expected ({n}, {h})", m.dim())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Shape(format!("{name} has non-finite cells")));
            }
        }
        for (name, v) in [("eua", &eua), ("coal", &coal), ("gas", &gas), ("oil", &oil)] {
            if v.len() != n {
                return Err(DataError::Shape(format!("{name} has {} days, expected {n}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DataError::Shape(format!("{name} has non-finite cells")));
            }
        }
        check_calendar(&days, &(1..=n).collect::<Vec<_>>())?;
        let weekday = days.iter().map(|d| d.weekday().number_from_monday() as u8).collect();
        Ok(Self { days, prices, load_fc, res_fc, eua, coal, gas, oil, weekday })
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn hours(&self) -> usize {
        self.prices.ncols()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.days[0]).num_days();
        usize::try_from(offset).ok().filter(|&i| i < self.days.len())
    }

    pub fn require_index(&self, date: NaiveDate) -> Result<usize, DataError> {
        self.index_of(date).ok_or(DataError::DateOutOfRange(date))
    }

    /// Prices of one hour over a day range.
    pub fn hour_prices(&self, hour: usize, days: std::ops::Range<usize>) -> Vec<f64> {
        days.map(|t| self.prices[[t, hour]]).collect()
    }
}

fn check_calendar(days: &[NaiveDate], rows: &[usize]) -> Result<(), DataError> {
    for i in 1..days.len() {
        let step = (days[i] - days[i - 1]).num_days();
        if step == 0 {
            return Err(DataError::DuplicateDate { row: rows[i], date: days[i] });
        }
        if step != 1 {
            return Err(DataError::Gap { row: rows[i], prev: days[i - 1], next: days[i] });
        }
    }
    Ok(())
}

/// Reads a wide CSV panel. Rows may come in any order; they are sorted by
/// date. Row numbers in errors are 1-based data rows in file order.
pub fn read_panel<R: Read>(input: R, schema: &PanelSchema) -> Result<PricePanel, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: HashMap<String, usize> =
        rdr.headers()?.iter().enumerate().map(|(i, name)| (name.to_string(), i)).collect();
    let names = schema.header();
    let cols: Vec<usize> = names
        .iter()
        .map(|n| header.get(n).copied().ok_or_else(|| DataError::MissingColumn(n.clone())))
        .collect::<Result<_, _>>()?;
    let h = schema.hours;
    let width = 3 * h + 4;

    let mut rows: Vec<(NaiveDate, usize, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let raw_date = rec.get(cols[0]).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| DataError::Parse {
            row,
            column: names[0].clone(),
            value: raw_date.to_string(),
        })?;
        let mut vals = Vec::with_capacity(width);
        for (c, name) in cols[1..].iter().zip(&names[1..]) {
            let cell = rec.get(*c).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(DataError::MissingCell { row, date, column: name.clone() });
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::Parse { row, column: name.clone(), value: cell.to_string() })?;
            vals.push(v);
        }
        rows.push((date, row, vals));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    rows.sort_by_key(|r| r.0);
    let days: Vec<NaiveDate> = rows.iter().map(|r| r.0).collect();
    let file_rows: Vec<usize> = rows.iter().map(|r| r.1).collect();
    check_calendar(&days, &file_rows)?;

    let n = rows.len();
    let block = |offset: usize| Array2::from_shape_fn((n, h), |(t, j)| rows[t].2[offset + j]);
    let scalar = |k: usize| rows.iter().map(|r| r.2[3 * h + k]).collect::<Vec<_>>();
    PricePanel::new(days, block(0), block(h), block(2 * h), scalar(0), scalar(1), scalar(2), scalar(3))
}

pub fn load_panel(path: &Path, schema: &PanelSchema) -> Result<PricePanel, DataError> {
    read_panel(File::open(path)?, schema)
}

/// Writes a panel with `schema`'s header, values in shortest round-trip form.
pub fn write_panel<W: Write>(out: W, panel: &PricePanel, schema: &PanelSchema) -> Result<(), DataError> {
    if schema.hours != panel.hours() {
        return Err(DataError::Shape(format!("schema has {} hours, panel {}", schema.hours, panel.hours())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.header())?;
    for t in 0..panel.n_days() {
        let mut rec = vec![panel.days[t].format(DATE_FORMAT).to_string()];
        for m in [&panel.prices, &panel.load_fc, &panel.res_fc] {
            rec.extend(m.row(t).iter().map(|v| v.to_string()));
        }
        for v in [panel.eua[t], panel.coal[t], panel.gas[t], panel.oil[t]] {
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

impl PricePanel {
    /// Version-tagged cache: a tag line followed by the default-schema CSV.
    pub fn write_cache<W: Write>(&self, mut out: W) -> Result<(), DataError> {
        writeln!(out, "{CACHE_TAG} hours={}", self.hours())?;
        write_panel(out, self, &PanelSchema::with_hours(self.hours()))
    }

    pub fn read_cache<R: Read>(input: R) -> Result<Self, DataError> {
        let mut reader = BufReader::new(input);
        let mut tag = String::new();
        reader.read_line(&mut tag)?;
        let hours = tag
            .trim_end()
            .strip_prefix(CACHE_TAG)
            .and_then(|rest| rest.trim().strip_prefix("hours="))
            .and_then(|h| h.parse::<usize>().ok())
            .ok_or_else(|| DataError::Cache(format!("unrecognized cache tag `{}`", tag.trim_end())))?;
        read_panel(reader, &PanelSchema::with_hours(hours))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_text(days: &[&str], hours: usize) -> String {
        let schema = PanelSchema::with_hours(hours);
        let mut s = schema.header().join(",");
        s.push('\n');
        for (i, d) in days.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            for b in 0..3 {
                rec.extend((0..hours).map(|h| format!("{}.5", 10 * b + h + i)));
            }
            rec.extend(["20.0", "60", "15.25", "70"].map(String::from));
            s.push_str(&rec.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_nine_days() {
        let days: Vec<String> = (1..=9).map(|d| format!("2021-01-{d:02}")).collect();
        let refs: Vec<&str> = days.iter().map(String::as_str).collect();
        let p = read_panel(csv_text(&refs, 24).as_bytes(), &PanelSchema::default()).unwrap();
        assert_eq!(p.n_days(), 9);
        assert_eq!(p.hours(), 24);
        assert_eq!(p.prices[[2, 3]], 5.5);
        assert_eq!(p.load_fc[[0, 0]], 10.5);
        // 2021-01-01 was a Friday.
        assert_eq!(p.weekday[0], 5);
        assert_eq!(p.gas[8], 15.25);
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let order = ["2021-01-03", "2021-01-01", "2021-01-04", "2021-01-02"];
        let text = csv_text(&order, 2);
        let p = read_panel(text.as_bytes(), &PanelSchema::with_hours(2)).unwrap();
        // Brute-force: sort the raw lines by their date field.
        let mut lines: Vec<&str> = text.lines().skip(1).collect();
        lines.sort_by_key(|l| l.split(',').next().unwrap().to_string());
        for (t, line) in lines.iter().enumerate() {
            let first_price: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(p.prices[[t, 0]], first_price);
            assert_eq!(p.days[t].format(DATE_FORMAT).to_string(), line.split(',').next().unwrap());
        }
    }

    #[test]
    fn missing_hour_names_the_date() {
        let text = csv_text(&["2021-01-01", "2021-01-02"], 24);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
        cells[13] = String::new();
        lines[2] = cells.join(",");
        let err = read_panel(lines.join("\n").as_bytes(), &PanelSchema::default()).unwrap_err();
        match err {
            DataError::MissingCell { row, date, column } => {
                assert_eq!((row, column.as_str()), (2, "price_13"));
                assert_eq!(date, NaiveDate::from_ymd_opt(2021, 1, 2).unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_gap_and_parse_errors() {
        let text = csv_text(&["2021-01-01", "2021-01-03"], 2);
        assert!(matches!(read_panel(text.as_bytes(), &PanelSchema::with_hours(2)), Err(DataError::Gap { row: 2, .. })));
        let text = csv_text(&["2021-01-01"], 2).replace("oil", "brent");
        assert!(matches!(read_panel(text.as_bytes(), &PanelSchema::with_hours(2)), Err(DataError::MissingColumn(c)) if c == "oil"));
        let text = csv_text(&["2021-01-01"], 2).replace("15.25", "15,25");
        assert!(read_panel(text.as_bytes(), &PanelSchema::with_hours(2)).is_err());
        let text = csv_text(&["2021-01-01"], 2).replace("20.0", "abc");
        assert!(matches!(read_panel(text.as_bytes(), &PanelSchema::with_hours(2)), Err(DataError::Parse { row: 1, .. })));
    }

    #[test]
    fn cache_round_trip() {
        let days: Vec<String> = (1..=5).map(|d| format!("2021-02-{d:02}")).collect();
        let refs: Vec<&str> = days.iter().map(String::as_str).collect();
        let p = read_panel(csv_text(&refs, 3).as_bytes(), &PanelSchema::with_hours(3)).unwrap();
        let mut buf = Vec::new();
        p.write_cache(&mut buf).unwrap();
        assert_eq!(PricePanel::read_cache(buf.as_slice()).unwrap(), p);
        assert!(matches!(PricePanel::read_cache(&b"#other v9\n"[..]), Err(DataError::Cache(_))));
    }
}
