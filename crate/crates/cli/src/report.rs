//! The seasonal forecast report written by `predict`.

use std::fmt::Write as _;

use monsoon_core::evaluation::{classify_tercile, Climatology};
use monsoon_core::ingest::jjas_date;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastReport {
    pub year: i32,
    pub variant: String,
    pub model: String,
    pub total_mm: f64,
    pub lpa_mm: f64,
    pub anomaly_mm: f64,
    pub percent_of_lpa: f64,
    pub tercile_lower_mm: f64,
    pub tercile_upper_mm: f64,
    pub category: String,
    /// Index months taken from forecast files rather than observations.
    pub forecast_months: Vec<ForecastMonth>,
    pub daily_mm: Vec<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastMonth {
    pub index: String,
    pub year: i32,
    pub month: u8,
}

pub const ISSUE_NOTE: &str = "Issue the forecast at least three months before 1 June so the exogenous inputs are forecasts, not observations.";

impl ForecastReport {
    pub fn new(
        year: i32,
        variant: &str,
        model: &str,
        total: f64,
        daily: Vec<f64>,
        clim: Climatology<f64>,
        forecast_months: Vec<ForecastMonth>,
    ) -> Self {
        Self {
            year,
            variant: variant.into(),
            model: model.into(),
            total_mm: total,
            lpa_mm: clim.lpa,
            anomaly_mm: total - clim.lpa,
            percent_of_lpa: 100.0 * total / clim.lpa,
            tercile_lower_mm: clim.t1,
            tercile_upper_mm: clim.t2,
            category: classify_tercile(total, clim.t1, clim.t2).as_str().into(),
            forecast_months,
            daily_mm: daily,
            note: ISSUE_NOTE.into(),
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "June-September {} rainfall forecast ({} {})",
            self.year, self.model, self.variant
        );
        let _ = writeln!(s, "seasonal total:  {:.1} mm", self.total_mm);
        let _ = writeln!(s, "LPA:             {:.1} mm", self.lpa_mm);
        let _ = writeln!(
            s,
            "anomaly:         {:+.1} mm ({:.1}% of LPA)",
            self.anomaly_mm, self.percent_of_lpa
        );
        let _ = writeln!(
            s,
            "terciles:        {:.1} / {:.1} mm",
            self.tercile_lower_mm, self.tercile_upper_mm
        );
        let _ = writeln!(s, "category:        {}", self.category);
        if self.forecast_months.is_empty() {
            let _ = writeln!(s, "inputs:          all observed");
        } else {
            let list: Vec<String> = self
                .forecast_months
                .iter()
                .map(|m| format!("{} {}-{:02}", m.index, m.year, m.month))
                .collect();
            let _ = writeln!(s, "forecast inputs: {}", list.join(", "));
        }
        let _ = writeln!(s, "note: {}", self.note);
        s
    }

    pub fn daily_csv(&self) -> String {
        let mut s = String::from("date,rain_mm\n");
        for (i, v) in self.daily_mm.iter().enumerate() {
            let _ = writeln!(s, "{},{v:.4}", jjas_date(self.year, i));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_and_category() {
        let clim = Climatology {
            lpa: 880.0,
            t1: 850.0,
            t2: 910.0,
        };
        let r = ForecastReport::new(
            2024,
            "D1_AISMR",
            "patchtst",
            921.6,
            vec![921.6 / 122.0; 122],
            clim,
            vec![],
        );
        assert!((r.percent_of_lpa - 104.727_272_7).abs() < 1e-6);
        assert_eq!(r.category, "above_normal");
        assert!(r
            .daily_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("2024-06-01,"));
        assert_eq!(r.daily_csv().lines().count(), 123);
    }
}
