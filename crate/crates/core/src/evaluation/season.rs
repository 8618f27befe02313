use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::evaluation::EvalError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TercileLabel {
    BelowNormal,
    Normal,
    AboveNormal,
}

impl TercileLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BelowNormal => "below_normal",
            Self::Normal => "normal",
            Self::AboveNormal => "above_normal",
        }
    }
}

impl fmt::Display for TercileLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Long-period average and tercile boundaries of seasonal totals (mm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Climatology<T> {
    pub lpa: T,
    pub t1: T,
    pub t2: T,
}

/// Quantile with linear interpolation between order statistics, `h = (n - 1) p`.
pub fn quantile_linear<T: Scalar>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + T::of(h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and empirical terciles of the totals for `reference` years.
pub fn long_period_average<T: Scalar>(
    totals: &BTreeMap<i32, T>,
    reference: RangeInclusive<i32>,
) -> Result<Climatology<T>, EvalError> {
    let mut values = Vec::new();
    for y in reference {
        match totals.get(&y) {
            Some(&v) => values.push(v),
            None => return Err(EvalError::UnknownYear(y)),
        }
    }
    if values.len() < 3 {
        return Err(EvalError::TooFewYears { n: values.len() });
    }
    let lpa = values.iter().copied().sum::<T>() / T::of(values.len() as f64);
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite totals"));
    let t1 = quantile_linear(&values, 1.0 / 3.0);
    let t2 = quantile_linear(&values, 2.0 / 3.0);
    if t1 >= t2 {
        return Err(EvalError::DegenerateTerciles);
    }
    Ok(Climatology { lpa, t1, t2 })
}

/// Boundaries belong to the normal class: `t1 <= total <= t2`.
pub fn classify_tercile<T: Scalar>(total: T, t1: T, t2: T) -> TercileLabel {
    if total < t1 {
        TercileLabel::BelowNormal
    } else if total > t2 {
        TercileLabel::AboveNormal
    } else {
        TercileLabel::Normal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRow<T> {
    pub year: i32,
    pub obs_total: T,
    pub pred_total: T,
    pub obs_anomaly: T,
    pub pred_anomaly: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySeries<T> {
    pub lpa: T,
    pub rows: Vec<AnomalyRow<T>>,
}

impl<T: Scalar> AnomalySeries<T> {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn anomaly_series<T: Scalar>(
    years: &[i32],
    observed: &[T],
    predicted: &[T],
    lpa: T,
) -> Result<AnomalySeries<T>, EvalError> {
    if years.len() != observed.len() || observed.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            left: observed.len(),
            right: predicted.len().max(years.len()),
        });
    }
    let rows = years
        .iter()
        .zip(observed.iter().zip(predicted))
        .map(|(&year, (&o, &p))| AnomalyRow {
            year,
            obs_total: o,
            pred_total: p,
            obs_anomaly: o - lpa,
            pred_anomaly: p - lpa,
        })
        .collect();
    Ok(AnomalySeries { lpa, rows })
}
