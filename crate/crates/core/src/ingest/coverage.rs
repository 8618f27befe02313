use std::collections::BTreeMap;
use std::fmt;

use crate::ingest::{CategoricalIodSeries, DailyRainfallSeries, MonthlyIndexSeries};

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub fn month_name(month: u8) -> &'static str {
    MONTHS[(month - 1) as usize]
}

/// The thirteen (year, month) keys May(T) .. May(T+1) feeding target year `T+1`.
pub fn nino_window_keys(target_year: i32) -> Vec<(i32, u8)> {
    (5..=12)
        .map(|m| (target_year - 1, m))
        .chain((1..=5).map(|m| (target_year, m)))
        .collect()
}

/// Jan .. Dec of the target year.
pub fn iod_window_keys(target_year: i32) -> Vec<(i32, u8)> {
    (1..=12).map(|m| (target_year, m)).collect()
}

/// One input a target year is missing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MissingInput {
    Rainfall {
        year: i32,
    },
    /// The previous season, needed to seed forecasts and for lookback features.
    RainfallLookback {
        year: i32,
    },
    Nino34 {
        year: i32,
        month: u8,
        target: i32,
    },
    Iod {
        year: i32,
        month: u8,
    },
}

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Rainfall { year } => write!(f, "rainfall {year} missing"),
            Self::RainfallLookback { year } => write!(f, "rainfall lookback season {year} missing"),
            Self::Nino34 {
                year,
                month,
                target,
            } => {
                let rel = if year < target { "T" } else { "T+1" };
                write!(
                    f,
                    "nino34 {}({rel}) missing ({year}-{month:02})",
                    month_name(month)
                )
            }
            Self::Iod { year, month } => write!(
                f,
                "iod {}(T+1) missing ({year}-{month:02})",
                month_name(month)
            ),
        }
    }
}

/// Which inputs a consumer needs for each target year.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Requirements {
    pub nino: bool,
    pub iod: bool,
    pub lookback: bool,
}

impl MissingInput {
    pub fn relevant_to(&self, req: Requirements) -> bool {
        match self {
            Self::Rainfall { .. } => true,
            Self::RainfallLookback { .. } => req.lookback,
            Self::Nino34 { .. } => req.nino,
            Self::Iod { .. } => req.iod,
        }
    }
}

/// Per target year, the inputs that are absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageReport {
    pub missing: BTreeMap<i32, Vec<MissingInput>>,
}

impl CoverageReport {
    pub fn missing_for(&self, year: i32) -> &[MissingInput] {
        self.missing
            .get(&year)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn gaps(&self, year: i32, req: Requirements) -> Vec<&MissingInput> {
        self.missing_for(year)
            .iter()
            .filter(|m| m.relevant_to(req))
            .collect()
    }

    pub fn is_complete(&self, year: i32, req: Requirements) -> bool {
        self.gaps(year, req).is_empty()
    }

    pub fn complete_years(&self, req: Requirements) -> Vec<i32> {
        self.missing
            .keys()
            .copied()
            .filter(|&y| self.is_complete(y, req))
            .collect()
    }

    /// Human-readable listing, one line per incompletely covered year.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut complete = 0;
        for (year, items) in &self.missing {
            if items.is_empty() {
                complete += 1;
                continue;
            }
            let list: Vec<String> = items.iter().map(ToString::to_string).collect();
            out.push_str(&format!("{year}: {}\n", list.join("; ")));
        }
        out.push_str(&format!(
            "{complete} of {} target years fully covered\n",
            self.missing.len()
        ));
        out
    }
}

pub fn validate_coverage(
    rain: &DailyRainfallSeries,
    nino: &MonthlyIndexSeries,
    iod: &CategoricalIodSeries,
    years: impl IntoIterator<Item = i32>,
) -> CoverageReport {
    let mut missing = BTreeMap::new();
    for year in years {
        let mut items = Vec::new();
        if !rain.contains_year(year) {
            items.push(MissingInput::Rainfall { year });
        }
        if !rain.contains_year(year - 1) {
            items.push(MissingInput::RainfallLookback { year: year - 1 });
        }
        for (y, m) in nino_window_keys(year) {
            if !nino.contains(y, m) {
                items.push(MissingInput::Nino34 {
                    year: y,
                    month: m,
                    target: year,
                });
            }
        }
        for (y, m) in iod_window_keys(year) {
            if !iod.contains(y, m) {
                items.push(MissingInput::Iod { year: y, month: m });
            }
        }
        missing.insert(year, items);
    }
    CoverageReport { missing }
}
