use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

/// Monthly climate index. Missing months are absent keys.
#[derive(Clone, Debug, PartialEq)]
pub struct MonthlyIndexSeries {
    pub name: String,
    values: BTreeMap<(i32, u8), f64>,
    pub missing_sentinel: f64,
}

impl MonthlyIndexSeries {
    pub fn new(name: impl Into<String>, missing_sentinel: f64) -> Self {
        Self {
            name: name.into(),
            values: BTreeMap::new(),
            missing_sentinel,
        }
    }

    /// Inserts a value; sentinel values are treated as missing and skipped.
    pub fn insert(&mut self, year: i32, month: u8, value: f64) -> Result<(), IngestError> {
        if !(1..=12).contains(&month) {
            return Err(IngestError::InvalidMonth { year, month });
        }
        if value == self.missing_sentinel || !value.is_finite() {
            return Ok(());
        }
        if self.values.insert((year, month), value).is_some() {
            return Err(IngestError::DuplicateKey { year, month });
        }
        Ok(())
    }

    pub fn value(&self, year: i32, month: u8) -> Option<f64> {
        self.values.get(&(year, month)).copied()
    }

    pub fn contains(&self, year: i32, month: u8) -> bool {
        self.values.contains_key(&(year, month))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i32, u8), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Entries of `other` fill months absent here; returns the keys taken from `other`.
    pub fn fill_from(&mut self, other: &MonthlyIndexSeries) -> Vec<(i32, u8)> {
        let mut taken = Vec::new();
        for (k, v) in other.iter() {
            if let std::collections::btree_map::Entry::Vacant(e) = self.values.entry(k) {
                e.insert(v);
                taken.push(k);
            }
        }
        taken
    }

    /// `year,month,<name>` CSV with shortest round-trip value formatting.
    pub fn to_csv(&self) -> String {
        let mut out = format!("year,month,{}\n", self.name);
        for ((y, m), v) in self.iter() {
            let _ = writeln!(out, "{y},{m},{v}");
        }
        out
    }

    /// NOAA fixed-layout text; absent months are written as the sentinel.
    pub fn to_noaa_text(&self) -> String {
        let (Some(&(first, _)), Some(&(last, _))) =
            (self.values.keys().next(), self.values.keys().next_back())
        else {
            return format!("0 0\n{}\n", self.missing_sentinel);
        };
        let mut out = format!("{first:>6}{last:>6}\n");
        for y in first..=last {
            let _ = write!(out, "{y:>6}");
            for m in 1..=12 {
                let _ = write!(
                    out,
                    " {}",
                    self.value(y, m).unwrap_or(self.missing_sentinel)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}\n  {}", self.missing_sentinel, self.name);
        out
    }
}

/// Parses the NOAA PSL fixed-layout monthly text: a `first last` year line,
/// rows of `year v1 .. v12`, a single-value sentinel line, then free footer.
pub fn parse_noaa_index_text(text: &str) -> Result<MonthlyIndexSeries, IngestError> {
    parse_noaa_index_text_named(text, "nino34")
}

pub fn parse_noaa_index_text_named(
    text: &str,
    name: &str,
) -> Result<MonthlyIndexSeries, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| IngestError::MalformedHeader("empty file".into()))?;
    let bounds: Vec<i32> = header
        .split_whitespace()
        .map(|t| t.parse::<i32>())
        .collect::<Result<_, _>>()
        .map_err(|_| IngestError::MalformedHeader(header.trim().to_string()))?;
    let [first, last] = bounds[..] else {
        return Err(IngestError::MalformedHeader(header.trim().to_string()));
    };
    if first > last {
        return Err(IngestError::MalformedHeader(format!(
            "year range {first} > {last}"
        )));
    }

    let mut rows: Vec<(i32, Vec<f64>)> = Vec::new();
    let mut sentinel = None;
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.len() {
            1 => {
                sentinel = Some(
                    fields[0]
                        .parse::<f64>()
                        .map_err(|_| IngestError::WrongFieldCount(line_no))?,
                );
                break;
            }
            13 => {
                let year: i32 = fields[0]
                    .parse()
                    .map_err(|_| IngestError::WrongFieldCount(line_no))?;
                if !(first..=last).contains(&year) {
                    return Err(IngestError::YearOutOfDeclaredRange(year));
                }
                let vals = fields[1..]
                    .iter()
                    .map(|f| f.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| IngestError::WrongFieldCount(line_no))?;
                rows.push((year, vals));
            }
            _ => return Err(IngestError::WrongFieldCount(line_no)),
        }
    }
    let sentinel = sentinel.ok_or(IngestError::MissingSentinel)?;
    let mut series = MonthlyIndexSeries::new(name, sentinel);
    for (year, vals) in rows {
        for (m, v) in vals.into_iter().enumerate() {
            series.insert(year, m as u8 + 1, v)?;
        }
    }
    Ok(series)
}

/// Parses a `year,month,<name>` CSV (for example `year,month,dmi`).
pub fn parse_monthly_csv(text: &str) -> Result<MonthlyIndexSeries, IngestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 3 || cols[0] != "year" || cols[1] != "month" || cols[2].is_empty() {
        return Err(IngestError::MalformedHeader(format!(
            "expected `year,month,<index>`, found `{header}`"
        )));
    }
    let mut series = MonthlyIndexSeries::new(cols[2], f64::NAN);
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(IngestError::MalformedRow(line_no));
        }
        let year: i32 = f[0]
            .parse()
            .map_err(|_| IngestError::MalformedRow(line_no))?;
        let month: u8 = f[1]
            .parse()
            .map_err(|_| IngestError::MalformedRow(line_no))?;
        let value: f64 = f[2]
            .parse()
            .map_err(|_| IngestError::MalformedRow(line_no))?;
        if !(1..=12).contains(&month) || !value.is_finite() {
            return Err(IngestError::MalformedRow(line_no));
        }
        series.insert(year, month, value)?;
    }
    Ok(series)
}

/// Parses a continuous DMI CSV with header `year,month,dmi`.
pub fn parse_iod_csv(text: &str) -> Result<MonthlyIndexSeries, IngestError> {
    parse_monthly_csv(text)
}

/// Accepts either the NOAA text layout or the monthly CSV layout.
pub fn parse_index_auto(text: &str, name: &str) -> Result<MonthlyIndexSeries, IngestError> {
    let first = text
        .trim_start_matches('\u{feff}')
        .lines()
        .next()
        .unwrap_or_default();
    if first.trim_start().starts_with("year,") {
        parse_monthly_csv(text)
    } else {
        parse_noaa_index_text_named(text, name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IodCategory {
    Negative,
    Neutral,
    Positive,
}

impl IodCategory {
    pub fn code(self) -> i8 {
        match self {
            Self::Negative => -1,
            Self::Neutral => 0,
            Self::Positive => 1,
        }
    }

    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            -1 => Some(Self::Negative),
            0 => Some(Self::Neutral),
            1 => Some(Self::Positive),
            _ => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.code())
    }
}

/// IOD state per month as -1 / 0 / +1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CategoricalIodSeries {
    values: BTreeMap<(i32, u8), IodCategory>,
}

impl CategoricalIodSeries {
    pub fn get(&self, year: i32, month: u8) -> Option<IodCategory> {
        self.values.get(&(year, month)).copied()
    }

    pub fn contains(&self, year: i32, month: u8) -> bool {
        self.values.contains_key(&(year, month))
    }

    pub fn insert(&mut self, year: i32, month: u8, cat: IodCategory) {
        self.values.insert((year, month), cat);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i32, u8), IodCategory)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

pub const DEFAULT_IOD_THRESHOLD: f64 = 0.4;

/// +1 above `pos_threshold`, -1 below `neg_threshold`, 0 otherwise.
pub fn categorize_iod(
    dmi: &MonthlyIndexSeries,
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<CategoricalIodSeries, IngestError> {
    if pos_threshold <= neg_threshold || pos_threshold.is_nan() || neg_threshold.is_nan() {
        return Err(IngestError::InvalidThresholds {
            pos: pos_threshold,
            neg: neg_threshold,
        });
    }
    let values = dmi
        .iter()
        .map(|(k, v)| {
            let cat = if v > pos_threshold {
                IodCategory::Positive
            } else if v < neg_threshold {
                IodCategory::Negative
            } else {
                IodCategory::Neutral
            };
            (k, cat)
        })
        .collect();
    Ok(CategoricalIodSeries { values })
}
