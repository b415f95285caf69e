//! Market data ingestion, winsorization, design-row assembly and rolling
//! window schedules.

mod design;
mod panel;
mod schedule;
mod winsor;

use chrono::NaiveDate;
use thiserror::Error;

pub use design::{
    build_design_row, design_matrix, targets_matrix, DesignLayout, DesignRow, FeatureScaler, WindowState, HISTORY_DAYS,
};
pub use panel::{load_panel, read_panel, write_panel, PanelSchema, PricePanel};
pub use schedule::{make_schedule, ScheduleEntry, WindowSchedule};
pub use winsor::{winsor_bounds, winsorize};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row} ({date}): missing value in column `{column}`")]
    MissingCell { row: usize, date: NaiveDate, column: String },
    #[error("row {row}: calendar gap between {prev} and {next}")]
    Gap { row: usize, prev: NaiveDate, next: NaiveDate },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: NaiveDate },
    #[error("panel has no rows")]
    Empty,
    #[error("inconsistent panel shape: {0}")]
    Shape(String),
    #[error("winsorization proportion {0} outside [0, 0.5)")]
    Proportion(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("day {day} lacks history; earliest feasible day is {earliest}")]
    InsufficientHistory { day: NaiveDate, earliest: NaiveDate },
    #[error("date {0} is outside the panel")]
    DateOutOfRange(NaiveDate),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Cdf(#[from] crate::cdftools::CdfError),
    #[error(transparent)]
    Transform(#[from] crate::transform::TransformError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
