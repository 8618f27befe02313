use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::FeatureError;
use crate::ingest::{
    iod_window_keys, month_name, nino_window_keys, validate_coverage, CategoricalIodSeries,
    DailyRainfallSeries, MonthlyIndexSeries, Requirements, JJAS_DAYS,
};

/// Last year of the training block by default; 2011 onward is test.
pub const DEFAULT_SPLIT_BOUNDARY: i32 = 2010;

const JJAS_MONTH_LENGTHS: [(u8, usize); 4] = [(6, 30), (7, 31), (8, 31), (9, 30)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetVariant {
    #[serde(rename = "D1_AISMR")]
    D1,
    #[serde(rename = "D2_AISMR_NINO")]
    D2,
    #[serde(rename = "D3_AISMR_IOD")]
    D3,
    #[serde(rename = "D4_AISMR_NINO_IOD")]
    D4,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 4] = [Self::D1, Self::D2, Self::D3, Self::D4];

    pub fn tag(self) -> &'static str {
        match self {
            Self::D1 => "D1_AISMR",
            Self::D2 => "D2_AISMR_NINO",
            Self::D3 => "D3_AISMR_IOD",
            Self::D4 => "D4_AISMR_NINO_IOD",
        }
    }

    pub fn short(self) -> &'static str {
        &self.tag()[..2]
    }

    pub fn uses_nino(self) -> bool {
        matches!(self, Self::D2 | Self::D4)
    }

    pub fn uses_iod(self) -> bool {
        matches!(self, Self::D3 | Self::D4)
    }

    pub fn channels(self) -> Vec<Channel> {
        let mut c = vec![Channel::Rain];
        if self.uses_nino() {
            c.push(Channel::Nino34);
        }
        if self.uses_iod() {
            c.push(Channel::Iod);
        }
        c
    }

    pub fn requirements(self, lookback: bool) -> Requirements {
        Requirements {
            nino: self.uses_nino(),
            iod: self.uses_iod(),
            lookback,
        }
    }

    /// Number of exogenous values appended to a baseline feature row.
    pub fn exo_len(self) -> usize {
        (if self.uses_nino() { 13 } else { 0 }) + (if self.uses_iod() { 12 } else { 0 })
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for DatasetVariant {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| s.eq_ignore_ascii_case(v.short()) || s.eq_ignore_ascii_case(v.tag()))
            .ok_or_else(|| FeatureError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Rain,
    Nino34,
    Iod,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rain => "rain",
            Self::Nino34 => "nino34",
            Self::Iod => "iod",
        }
    }
}

impl FromStr for Channel {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Rain, Self::Nino34, Self::Iod]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| FeatureError::UnknownChannel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn of(year: i32, boundary: i32) -> Self {
        if year <= boundary {
            Self::Train
        } else {
            Self::Test
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Test => "test",
        }
    }
}

/// Everything a variant knows about one target year.
#[derive(Clone, Debug, PartialEq)]
pub struct YearRecord {
    pub year: i32,
    pub split: Split,
    /// One 122-day vector per dataset channel, in `SeasonDataset::channels` order.
    pub daily: Vec<Vec<f64>>,
    /// May of the previous year through May of the target year.
    pub nino_window: Option<Vec<f64>>,
    /// IOD category codes, January through December of the target year.
    pub iod_window: Option<Vec<f64>>,
    /// Previous JJAS season's rain, used to seed a rollout.
    pub prior_season: Option<Vec<f64>>,
    /// Sum of the unscaled daily rain, in mm.
    pub seasonal_total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeasonDataset {
    pub variant: DatasetVariant,
    pub channels: Vec<Channel>,
    pub split_boundary: i32,
    pub records: Vec<YearRecord>,
    /// Whether daily channels and prior seasons are in standardized units.
    pub scaled: bool,
}

impl SeasonDataset {
    pub fn years(&self) -> Vec<i32> {
        self.records.iter().map(|r| r.year).collect()
    }

    pub fn record(&self, year: i32) -> Option<&YearRecord> {
        self.records
            .binary_search_by_key(&year, |r| r.year)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn years_in(&self, split: Split) -> Vec<i32> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.year)
            .collect()
    }

    pub fn channel_index(&self, channel: Channel) -> Option<usize> {
        self.channels.iter().position(|&c| c == channel)
    }

    /// SHA-256 over every stored value, for manifest fingerprints.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.variant.tag().as_bytes());
        h.update(self.split_boundary.to_le_bytes());
        for r in &self.records {
            h.update(r.year.to_le_bytes());
            for v in r.daily.iter().flatten() {
                h.update(v.to_le_bytes());
            }
            for w in [&r.nino_window, &r.iod_window, &r.prior_season]
                .into_iter()
                .flatten()
            {
                for v in w {
                    h.update(v.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// Spreads a monthly window over the 122 JJAS days, each day taking its
/// calendar month's value. A 13-entry vector is read as May(T)..May(T+1),
/// so June-September come from T; a 12-entry vector is read as Jan-Dec.
pub fn broadcast_monthly_to_daily(monthly: &[Option<f64>]) -> Result<Vec<f64>, FeatureError> {
    let first_month = match monthly.len() {
        13 => 5,
        12 => 1,
        n => return Err(FeatureError::BadMonthlyLength(n)),
    };
    if let Some(i) = monthly.iter().position(Option::is_none) {
        return Err(FeatureError::MissingMonth(month_name(
            ((first_month - 1 + i) % 12 + 1) as u8,
        )));
    }
    let mut out = Vec::with_capacity(JJAS_DAYS);
    for (month, days) in JJAS_MONTH_LENGTHS {
        let v = monthly[month as usize - first_month].expect("checked above");
        out.extend(std::iter::repeat_n(v, days));
    }
    Ok(out)
}

fn window_values(keys: &[(i32, u8)], get: impl Fn(i32, u8) -> Option<f64>) -> Vec<Option<f64>> {
    keys.iter().map(|&(y, m)| get(y, m)).collect()
}

/// Assembles the per-year records for `variant`. Years are sorted and
/// deduplicated; any missing input the variant needs is an error.
pub fn build_season_dataset(
    variant: DatasetVariant,
    rain: &DailyRainfallSeries,
    nino: &MonthlyIndexSeries,
    iod: &CategoricalIodSeries,
    years: &[i32],
    split_boundary: i32,
) -> Result<SeasonDataset, FeatureError> {
    let mut years = years.to_vec();
    years.sort_unstable();
    years.dedup();
    let coverage = validate_coverage(rain, nino, iod, years.iter().copied());
    let req = variant.requirements(false);
    let mut records = Vec::with_capacity(years.len());
    for &year in &years {
        if let Some(gap) = coverage.gaps(year, req).first() {
            return Err(FeatureError::CoverageGap {
                year,
                input: gap.to_string(),
            });
        }
        let season = rain.season(year).expect("coverage checked").to_vec();
        let mut daily = vec![season.clone()];
        let nino_window = variant
            .uses_nino()
            .then(|| window_values(&nino_window_keys(year), |y, m| nino.value(y, m)));
        let iod_window = variant.uses_iod().then(|| {
            window_values(&iod_window_keys(year), |y, m| {
                iod.get(y, m).map(|c| c.as_f64())
            })
        });
        for w in [&nino_window, &iod_window].into_iter().flatten() {
            daily.push(broadcast_monthly_to_daily(w)?);
        }
        let unwrap = |w: Option<Vec<Option<f64>>>| {
            w.map(|v| {
                v.into_iter()
                    .map(|x| x.expect("coverage checked"))
                    .collect()
            })
        };
        records.push(YearRecord {
            year,
            split: Split::of(year, split_boundary),
            seasonal_total: season.iter().sum(),
            daily,
            nino_window: unwrap(nino_window),
            iod_window: unwrap(iod_window),
            prior_season: rain.season(year - 1).map(<[f64]>::to_vec),
        });
    }
    Ok(SeasonDataset {
        variant,
        channels: variant.channels(),
        split_boundary,
        records,
        scaled: false,
    })
}
