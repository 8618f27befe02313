//! Forecast skill metrics, seasonal climatology, anomalies and the
//! multi-model comparison table.

mod metrics;
mod report;
mod season;

use thiserror::Error;

pub use metrics::{rank, rmse_percent, rmse_percent_with, spearman, RmseConvention};
pub use report::{
    anomaly_csv, anomaly_svg, build_comparison_table, comparison_csv, comparison_svg,
    emit_anomalies, emit_comparison, MetricReport, PlotFiles, ANOMALY_HEADER, COMPARISON_HEADER,
};
pub use season::{
    anomaly_series, classify_tercile, long_period_average, quantile_linear, AnomalyRow,
    AnomalySeries, Climatology, TercileLabel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("observation {index} is zero")]
    ZeroObservation { index: usize },
    #[error("need at least {min} values, got {n}")]
    DegenerateN { n: usize, min: usize },
    #[error("need at least 3 reference years, got {n}")]
    TooFewYears { n: usize },
    #[error("reference year {0} has no seasonal total")]
    UnknownYear(i32),
    #[error("tercile thresholds coincide")]
    DegenerateTerciles,
}
