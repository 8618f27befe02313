use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};

use crate::ingest::{IngestError, JJAS_DAYS};

/// Day offset of `date` within its year's June 1 – September 30 season.
pub fn jjas_day_index(date: NaiveDate) -> Option<usize> {
    if !(6..=9).contains(&date.month()) {
        return None;
    }
    let june1 = NaiveDate::from_ymd_opt(date.year(), 6, 1)?;
    Some((date - june1).num_days() as usize)
}

/// Calendar date of season day `index` (0 = June 1) in `year`.
pub fn jjas_date(year: i32, index: usize) -> NaiveDate {
    assert!(index < JJAS_DAYS, "season day {index} out of range");
    NaiveDate::from_ymd_opt(year, 6, 1).expect("valid year") + chrono::Days::new(index as u64)
}

/// All-India daily rainfall (mm/day) for complete JJAS seasons.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyRainfallSeries {
    seasons: BTreeMap<i32, Vec<f64>>,
}

impl DailyRainfallSeries {
    /// Builds from per-year 122-day vectors.
    pub fn from_seasons(seasons: BTreeMap<i32, Vec<f64>>) -> Result<Self, IngestError> {
        for (&year, days) in &seasons {
            if days.len() != JJAS_DAYS {
                return Err(IngestError::IncompleteYear(year));
            }
            if let Some(i) = days.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(IngestError::NegativeRainfall {
                    date: jjas_date(year, i).to_string(),
                    value: days[i],
                });
            }
        }
        Ok(Self { seasons })
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.seasons.keys().copied()
    }

    pub fn num_years(&self) -> usize {
        self.seasons.len()
    }

    pub fn season(&self, year: i32) -> Option<&[f64]> {
        self.seasons.get(&year).map(Vec::as_slice)
    }

    pub fn contains_year(&self, year: i32) -> bool {
        self.seasons.contains_key(&year)
    }

    pub fn seasonal_total(&self, year: i32) -> Option<f64> {
        self.season(year).map(|d| d.iter().sum())
    }

    pub fn totals(&self) -> BTreeMap<i32, f64> {
        self.seasons
            .iter()
            .map(|(&y, d)| (y, d.iter().sum()))
            .collect()
    }

    /// Dated entries in increasing date order.
    pub fn entries(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.seasons.iter().flat_map(|(&y, days)| {
            days.iter()
                .enumerate()
                .map(move |(i, &v)| (jjas_date(y, i), v))
        })
    }

    pub fn len(&self) -> usize {
        self.seasons.len() * JJAS_DAYS
    }

    pub fn is_empty(&self) -> bool {
        self.seasons.is_empty()
    }

    /// Serializes to the `date,rain_mm` CSV format; values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,rain_mm\n");
        for (d, v) in self.entries() {
            let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), v);
        }
        out
    }
}

/// Parses the `date,rain_mm` CSV. Rows may come in any order; every year
/// present must cover all 122 JJAS days.
pub fn parse_daily_rainfall_csv(text: &str) -> Result<DailyRainfallSeries, IngestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or_default();
    if header.replace(' ', "") != "date,rain_mm" {
        return Err(IngestError::MalformedHeader(format!(
            "expected `date,rain_mm`, found `{header}`"
        )));
    }
    let mut seasons: BTreeMap<i32, Vec<Option<f64>>> = BTreeMap::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (date, value) = line
            .split_once(',')
            .ok_or(IngestError::MalformedRow(line_no))?;
        let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d")
            .map_err(|_| IngestError::MalformedRow(line_no))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| IngestError::MalformedRow(line_no))?;
        if !value.is_finite() {
            return Err(IngestError::MalformedRow(line_no));
        }
        if value < 0.0 {
            return Err(IngestError::NegativeRainfall {
                date: date.to_string(),
                value,
            });
        }
        let day = jjas_day_index(date).ok_or_else(|| IngestError::NonJjasDate(date.to_string()))?;
        let slot = &mut seasons
            .entry(date.year())
            .or_insert_with(|| vec![None; JJAS_DAYS])[day];
        if slot.replace(value).is_some() {
            return Err(IngestError::DuplicateDate(date.to_string()));
        }
    }
    let complete = seasons
        .into_iter()
        .map(|(year, days)| {
            days.into_iter()
                .collect::<Option<Vec<f64>>>()
                .map(|d| (year, d))
                .ok_or(IngestError::IncompleteYear(year))
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    DailyRainfallSeries::from_seasons(complete)
}
