//! Model-ready datasets: the four exogenous-feature variants, daily
//! broadcast of monthly indices, standard scaling, sliding windows and the
//! flat lookback tables used by the classical baselines.

mod baseline;
mod bundle;
mod dataset;
mod scaler;
mod windows;

use thiserror::Error;

pub use baseline::{enumerate_baseline_datasets, make_baseline_table, BaselineTable, LOOKBACKS};
pub use bundle::{
    read_baseline_bundle, read_season_bundle, write_baseline_bundle, write_season_bundle,
    BundleManifest,
};
pub use dataset::{
    broadcast_monthly_to_daily, build_season_dataset, Channel, DatasetVariant, SeasonDataset,
    Split, YearRecord, DEFAULT_SPLIT_BOUNDARY,
};
pub use scaler::{apply_scaler, fit_scaler, invert_scaler, ChannelStats, ScalerParams};
pub use windows::{make_windows, make_windows_for_years, WindowedBatch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("monthly vector is missing {0}")]
    MissingMonth(&'static str),
    #[error("monthly vector has {0} entries, expected 12 or 13")]
    BadMonthlyLength(usize),
    #[error("coverage gap for target year {year}: {input}")]
    CoverageGap { year: i32, input: String },
    #[error("no training years before the split boundary")]
    EmptyTrainSplit,
    #[error("channel {0} has zero variance on the training split")]
    DegenerateChannel(String),
    #[error("scaler has no parameters for channel {0}")]
    UnknownChannel(String),
    #[error("window {w} plus horizon {h} exceeds the 122-day season")]
    WindowTooLong { w: usize, h: usize },
    #[error("window and horizon must both be at least 1")]
    EmptyWindow,
    #[error("lookback {0} outside 1..=5")]
    InvalidLookback(u8),
    #[error("no target year of {variant} has {lookback} preceding seasons")]
    EmptyTable {
        variant: DatasetVariant,
        lookback: u8,
    },
    #[error("unknown dataset variant {0:?}")]
    UnknownVariant(String),
    #[error("bundle error: {0}")]
    Bundle(String),
}
