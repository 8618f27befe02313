//! The comparison models fitted on lookback tables.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use monsoon_core::features::{BaselineTable, Split};
use monsoon_core::models::{
    gbt_fit, gbt_predict, ols_fit, ols_predict, svr_fit, svr_predict, table_sequences, CnnBaseline,
    LstmBaseline, Network, TableScaler,
};
use monsoon_core::training::{split_validation, train, TrainConfig};

use crate::pipeline::TestScores;
use crate::settings::Settings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaselineKind {
    Lr,
    Gbt,
    Svr,
    Lstm,
    Cnn,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [Self::Lr, Self::Gbt, Self::Svr, Self::Lstm, Self::Cnn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lr => "LR",
            Self::Gbt => "GBT",
            Self::Svr => "SVR",
            Self::Lstm => "LSTM",
            Self::Cnn => "CNN",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "ols" | "linear" => Ok(Self::Lr),
            "gbt" | "xgboost" => Ok(Self::Gbt),
            "svr" => Ok(Self::Svr),
            "lstm" => Ok(Self::Lstm),
            "cnn" => Ok(Self::Cnn),
            _ => Err(format!("unknown baseline {s:?}")),
        }
    }
}

/// Fits `kind` on the training rows of `table` and predicts the test rows' totals.
pub fn run_baseline(
    kind: BaselineKind,
    table: &BaselineTable,
    all: &Settings,
) -> Result<TestScores> {
    let (settings, train_cfg) = (&all.baselines, &all.train);
    let tr = table.subset(Split::Train);
    let te = table.subset(Split::Test);
    if tr.is_empty() || te.is_empty() {
        bail!(
            "{} lookback {} has {} training and {} test rows",
            table.variant,
            table.lookback,
            tr.len(),
            te.len()
        );
    }
    let predicted: Vec<f64> = match kind {
        BaselineKind::Lr => {
            let m = ols_fit(&tr.features, &tr.targets, &settings.ols)?;
            te.features.iter().map(|f| ols_predict(&m, f)).collect()
        }
        BaselineKind::Gbt => {
            let m = gbt_fit(&tr.features, &tr.targets, &settings.gbt)?;
            te.features.iter().map(|f| gbt_predict(&m, f)).collect()
        }
        BaselineKind::Svr => {
            let m = svr_fit(&tr.features, &tr.targets, &settings.svr)?;
            te.features.iter().map(|f| svr_predict(&m, f)).collect()
        }
        BaselineKind::Lstm | BaselineKind::Cnn => {
            let scaler = TableScaler::fit(table, settings.pool_days)?;
            let samples = table_sequences(table, &scaler, Some(Split::Train));
            let test = table_sequences(table, &scaler, Some(Split::Test));
            let (fit_rows, val_rows) = split_validation(&samples, train_cfg.validation_fraction);
            let cfg = TrainConfig {
                max_epochs: train_cfg.max_epochs.min(settings.max_epochs),
                ..train_cfg.clone()
            };
            let (steps, channels) = (samples.steps, samples.channels);
            let out = if kind == BaselineKind::Lstm {
                let mut net =
                    LstmBaseline::<f64>::new(all.net.lstm.clone(), steps, channels, 1, cfg.seed)?;
                train(&mut net, &fit_rows, &val_rows, &cfg)?;
                net.predict(&test.inputs, test.len())?
            } else {
                let mut net =
                    CnnBaseline::<f64>::new(all.net.cnn.clone(), steps, channels, 1, cfg.seed)?;
                train(&mut net, &fit_rows, &val_rows, &cfg)?;
                net.predict(&test.inputs, test.len())?
            };
            out.into_iter()
                .map(|z| scaler.total_from_output(z))
                .collect()
        }
    };
    Ok(TestScores {
        years: te.years.clone(),
        observed: te.targets.clone(),
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use monsoon_core::features::{enumerate_baseline_datasets, DatasetVariant};
    use monsoon_core::synthetic::{generate, SyntheticConfig};

    #[test]
    fn every_baseline_scores_a_small_table() {
        let data = generate(&SyntheticConfig {
            years: 24,
            ..Default::default()
        });
        let tables = enumerate_baseline_datasets(
            &data.rain,
            &data.nino,
            &data.iod,
            &data.target_years,
            1918,
        )
        .unwrap();
        let table = tables
            .iter()
            .find(|t| t.variant == DatasetVariant::D4 && t.lookback == 2)
            .unwrap();
        let mut settings = Settings::default();
        settings.baselines.max_epochs = 3;
        for kind in BaselineKind::ALL {
            let s = run_baseline(kind, table, &settings).unwrap();
            assert_eq!(s.years, (1919..=1924).collect::<Vec<_>>(), "{kind}");
            assert!(s.predicted.iter().all(|p| p.is_finite()), "{kind}");
        }
    }
}
