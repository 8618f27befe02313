//! Synthetic seasons whose JJAS totals are an affine function of the
//! thirteen-month Niño3.4 window and the target-year IOD category, plus
//! independent daily noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::RngState;
use crate::ingest::{
    categorize_iod, nino_window_keys, CategoricalIodSeries, DailyRainfallSeries,
    MonthlyIndexSeries, DEFAULT_IOD_THRESHOLD, JJAS_DAYS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub first_year: i32,
    pub years: usize,
    pub seed: u64,
    /// Season total (mm) at neutral index values.
    pub base_total: f64,
    /// mm per °C of mean Niño3.4 over the May-to-May window.
    pub nino_coef: f64,
    /// mm per unit of mean IOD category over June-September.
    pub iod_coef: f64,
    /// Standard deviation of daily rain around the seasonal mean (mm/day).
    pub daily_noise: f64,
    /// Month-to-month jitter added to the yearly index states.
    pub monthly_noise: f64,
    pub dmi_std: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            first_year: 1901,
            years: 120,
            seed: 0,
            base_total: 900.0,
            nino_coef: -60.0,
            iod_coef: 40.0,
            daily_noise: 2.0,
            monthly_noise: 0.1,
            dmi_std: 0.6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub config: SyntheticConfig,
    /// Covers the target years plus the season before the first one.
    pub rain: DailyRainfallSeries,
    pub nino: MonthlyIndexSeries,
    pub dmi: MonthlyIndexSeries,
    pub iod: CategoricalIodSeries,
    pub target_years: Vec<i32>,
    /// Noise-free season totals implied by the indices.
    pub signal_totals: BTreeMap<i32, f64>,
}

impl SyntheticConfig {
    pub fn last_year(&self) -> i32 {
        self.first_year + self.years as i32 - 1
    }
}

/// Deterministic in `config.seed`.
pub fn generate(config: &SyntheticConfig) -> SyntheticData {
    let mut rng = RngState::seeded(config.seed);
    let (first, last) = (config.first_year, config.last_year());
    // ENSO year y runs June(y-1) .. May(y).
    let enso: BTreeMap<i32, f64> = (first - 2..=last + 1).map(|y| (y, rng.normal())).collect();
    let mut nino = MonthlyIndexSeries::new("nino34", -99.99);
    let mut dmi = MonthlyIndexSeries::new("dmi", -9999.0);
    for y in first - 2..=last {
        let d = config.dmi_std * rng.normal();
        for m in 1..=12u8 {
            let state = enso[&if m >= 6 { y + 1 } else { y }];
            nino.insert(y, m, state + config.monthly_noise * rng.normal())
                .expect("fresh key");
            dmi.insert(y, m, d + config.monthly_noise * rng.normal())
                .expect("fresh key");
        }
    }
    let iod = categorize_iod(&dmi, DEFAULT_IOD_THRESHOLD, -DEFAULT_IOD_THRESHOLD)
        .expect("valid thresholds");

    let mut seasons = BTreeMap::new();
    let mut signal_totals = BTreeMap::new();
    for y in first - 1..=last {
        let nino_mean = nino_window_keys(y)
            .iter()
            .map(|&(yy, m)| nino.value(yy, m).expect("generated"))
            .sum::<f64>()
            / 13.0;
        let iod_mean = (6..=9u8)
            .map(|m| iod.get(y, m).expect("generated").as_f64())
            .sum::<f64>()
            / 4.0;
        let total = config.base_total + config.nino_coef * nino_mean + config.iod_coef * iod_mean;
        let daily_mean = total / JJAS_DAYS as f64;
        let days: Vec<f64> = (0..JJAS_DAYS)
            .map(|_| (daily_mean + config.daily_noise * rng.normal()).max(0.0))
            .collect();
        seasons.insert(y, days);
        signal_totals.insert(y, total);
    }
    SyntheticData {
        config: config.clone(),
        rain: DailyRainfallSeries::from_seasons(seasons).expect("non-negative seasons"),
        nino,
        dmi,
        iod,
        target_years: (first..=last).collect(),
        signal_totals,
    }
}
