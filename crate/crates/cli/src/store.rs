//! The ingested data store: normalized CSVs plus a small JSON descriptor.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use monsoon_core::autodiff::write_atomic;
use monsoon_core::ingest::{
    categorize_iod, parse_daily_rainfall_csv, parse_monthly_csv, CategoricalIodSeries,
    DailyRainfallSeries, MonthlyIndexSeries,
};
use monsoon_core::synthetic::SyntheticData;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RAIN_FILE: &str = "rain.csv";
pub const NINO_FILE: &str = "nino34.csv";
pub const DMI_FILE: &str = "dmi.csv";
pub const STORE_FILE: &str = "store.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreInfo {
    pub iod_pos_threshold: f64,
    pub iod_neg_threshold: f64,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    /// sha256 of each stored file.
    pub files: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct Store {
    pub rain: DailyRainfallSeries,
    pub nino: MonthlyIndexSeries,
    pub dmi: MonthlyIndexSeries,
    pub iod: CategoricalIodSeries,
    pub iod_thresholds: (f64, f64),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Store {
    pub fn new(
        rain: DailyRainfallSeries,
        nino: MonthlyIndexSeries,
        dmi: MonthlyIndexSeries,
        pos: f64,
        neg: f64,
    ) -> Result<Self> {
        let iod = categorize_iod(&dmi, pos, neg)?;
        Ok(Self {
            rain,
            nino,
            dmi,
            iod,
            iod_thresholds: (pos, neg),
        })
    }

    pub fn from_synthetic(data: &SyntheticData) -> Self {
        Self {
            rain: data.rain.clone(),
            nino: data.nino.clone(),
            dmi: data.dmi.clone(),
            iod: data.iod.clone(),
            iod_thresholds: (
                monsoon_core::ingest::DEFAULT_IOD_THRESHOLD,
                -monsoon_core::ingest::DEFAULT_IOD_THRESHOLD,
            ),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<StoreInfo> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut files = Vec::new();
        for (name, body) in [
            (RAIN_FILE, self.rain.to_csv()),
            (NINO_FILE, self.nino.to_csv()),
            (DMI_FILE, self.dmi.to_csv()),
        ] {
            write_atomic(&dir.join(name), body.as_bytes())?;
            files.push((name.to_string(), sha256_hex(body.as_bytes())));
        }
        let info = StoreInfo {
            iod_pos_threshold: self.iod_thresholds.0,
            iod_neg_threshold: self.iod_thresholds.1,
            first_year: self.rain.years().next(),
            last_year: self.rain.years().last(),
            files,
        };
        write_atomic(
            &dir.join(STORE_FILE),
            serde_json::to_string_pretty(&info)?.as_bytes(),
        )?;
        Ok(info)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name))
                .with_context(|| format!("reading {}", dir.join(name).display()))
        };
        let info: StoreInfo =
            serde_json::from_str(&read(STORE_FILE)?).context("parsing store.json")?;
        let rain = parse_daily_rainfall_csv(&read(RAIN_FILE)?).context("stored rainfall")?;
        let nino = parse_monthly_csv(&read(NINO_FILE)?).context("stored nino34")?;
        let dmi = parse_monthly_csv(&read(DMI_FILE)?).context("stored dmi")?;
        Self::new(
            rain,
            nino,
            dmi,
            info.iod_pos_threshold,
            info.iod_neg_threshold,
        )
    }

    /// Content hash over the three stored series.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.rain.to_csv());
        h.update(self.nino.to_csv());
        h.update(self.dmi.to_csv());
        hex::encode(h.finalize())
    }
}
