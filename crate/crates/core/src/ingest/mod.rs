//! Parsers and validation for the three raw inputs: all-India daily JJAS
//! rainfall, the NOAA Niño3.4 monthly text file, and the monthly DMI (IOD)
//! CSV, plus cached retrieval of remote copies.

mod coverage;
mod index;
mod rainfall;
mod source;

use thiserror::Error;

pub use coverage::{
    iod_window_keys, month_name, nino_window_keys, validate_coverage, CoverageReport, MissingInput,
    Requirements,
};
pub use index::{
    categorize_iod, parse_index_auto, parse_iod_csv, parse_monthly_csv, parse_noaa_index_text,
    parse_noaa_index_text_named, CategoricalIodSeries, IodCategory, MonthlyIndexSeries,
    DEFAULT_IOD_THRESHOLD,
};
pub use rainfall::{jjas_date, jjas_day_index, parse_daily_rainfall_csv, DailyRainfallSeries};
pub use source::{cache_path, fetch_source, is_url, SourceKind, SourceSpec};

/// Days from June 1 to September 30 inclusive.
pub const JJAS_DAYS: usize = 122;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("duplicate date {0}")]
    DuplicateDate(String),
    #[error("negative rainfall {value} on {date}")]
    NegativeRainfall { date: String, value: f64 },
    #[error("date {0} is outside June-September")]
    NonJjasDate(String),
    #[error("year {0} does not have exactly 122 JJAS entries")]
    IncompleteYear(i32),
    #[error("year {0} outside the declared range")]
    YearOutOfDeclaredRange(i32),
    #[error("wrong number of fields at line {0}")]
    WrongFieldCount(usize),
    #[error("missing-value sentinel line not found")]
    MissingSentinel,
    #[error("duplicate entry for {year}-{month:02}")]
    DuplicateKey { year: i32, month: u8 },
    #[error("month {month} of {year} is not in 1..=12")]
    InvalidMonth { year: i32, month: u8 },
    #[error("positive threshold {pos} must exceed negative threshold {neg}")]
    InvalidThresholds { pos: f64, neg: f64 },
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("network unavailable and no cached copy: {0}")]
    NetworkUnavailable(String),
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("i/o error: {0}")]
    Io(String),
}
