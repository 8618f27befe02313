use rayon::prelude::*;

use crate::features::{build_season_dataset, DatasetVariant, FeatureError, SeasonDataset, Split};
use crate::ingest::{CategoricalIodSeries, DailyRainfallSeries, MonthlyIndexSeries, JJAS_DAYS};

pub const LOOKBACKS: [u8; 5] = [1, 2, 3, 4, 5];

/// Flat feature rows for the classical baselines, one per target year.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineTable {
    pub variant: DatasetVariant,
    pub lookback: u8,
    pub years: Vec<i32>,
    pub splits: Vec<Split>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl BaselineTable {
    pub fn feature_len(&self) -> usize {
        self.lookback as usize * JJAS_DAYS + self.variant.exo_len()
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// Rows of one split as a new table.
    pub fn subset(&self, split: Split) -> BaselineTable {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.splits[i] == split)
            .collect();
        BaselineTable {
            variant: self.variant,
            lookback: self.lookback,
            years: keep.iter().map(|&i| self.years[i]).collect(),
            splits: keep.iter().map(|&i| self.splits[i]).collect(),
            features: keep.iter().map(|&i| self.features[i].clone()).collect(),
            targets: keep.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Rain of the `lookback` preceding seasons followed by the target year's
/// exogenous windows. Years without enough history are left out.
pub fn make_baseline_table(
    dataset: &SeasonDataset,
    lookback: u8,
) -> Result<BaselineTable, FeatureError> {
    if !LOOKBACKS.contains(&lookback) {
        return Err(FeatureError::InvalidLookback(lookback));
    }
    let variant = dataset.variant;
    let mut table = BaselineTable {
        variant,
        lookback,
        years: vec![],
        splits: vec![],
        features: vec![],
        targets: vec![],
    };
    for r in &dataset.records {
        let history: Option<Vec<&crate::features::YearRecord>> = (1..=lookback as i32)
            .rev()
            .map(|k| dataset.record(r.year - k))
            .collect();
        let Some(history) = history else { continue };
        let mut f = Vec::with_capacity(table.feature_len());
        for h in history {
            f.extend_from_slice(&h.daily[0]);
        }
        if let Some(w) = &r.nino_window {
            f.extend_from_slice(w);
        }
        if let Some(w) = &r.iod_window {
            f.extend_from_slice(w);
        }
        table.years.push(r.year);
        table.splits.push(r.split);
        table.features.push(f);
        table.targets.push(r.seasonal_total);
    }
    if table.is_empty() {
        return Err(FeatureError::EmptyTable { variant, lookback });
    }
    Ok(table)
}

/// Every (variant, lookback) combination: four variants by five lookbacks.
pub fn enumerate_baseline_datasets(
    rain: &DailyRainfallSeries,
    nino: &MonthlyIndexSeries,
    iod: &CategoricalIodSeries,
    years: &[i32],
    split_boundary: i32,
) -> Result<Vec<BaselineTable>, FeatureError> {
    let datasets: Vec<SeasonDataset> = DatasetVariant::ALL
        .par_iter()
        .map(|&v| build_season_dataset(v, rain, nino, iod, years, split_boundary))
        .collect::<Result<_, _>>()?;
    datasets
        .par_iter()
        .flat_map_iter(|ds| LOOKBACKS.iter().map(move |&l| make_baseline_table(ds, l)))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::features::dataset::tests::full_inputs;

    fn dataset(variant: DatasetVariant, years: std::ops::RangeInclusive<i32>) -> SeasonDataset {
        let (rain, nino, iod) = full_inputs(years.clone());
        let ys: Vec<i32> = years.collect();
        build_season_dataset(variant, &rain, &nino, &iod, &ys, 2010).unwrap()
    }

    #[test]
    fn feature_lengths() {
        let t = make_baseline_table(&dataset(DatasetVariant::D1, 1950..=1955), 2).unwrap();
        assert!(t.features.iter().all(|f| f.len() == 244));
        assert_eq!(t.years, (1952..=1955).collect::<Vec<_>>());
        let t = make_baseline_table(&dataset(DatasetVariant::D4, 1950..=1955), 1).unwrap();
        assert!(t.features.iter().all(|f| f.len() == 147));
        assert_eq!(t.feature_len(), 147);
    }

    #[test]
    fn row_layout() {
        let ds = dataset(DatasetVariant::D2, 1950..=1953);
        let t = make_baseline_table(&ds, 2).unwrap();
        let i = t.years.iter().position(|&y| y == 1953).unwrap();
        assert_eq!(t.features[i][..122], ds.record(1951).unwrap().daily[0][..]);
        assert_eq!(
            t.features[i][122..244],
            ds.record(1952).unwrap().daily[0][..]
        );
        assert_eq!(
            &t.features[i][244..],
            &ds.record(1953).unwrap().nino_window.clone().unwrap()[..]
        );
        assert_eq!(t.targets[i], ds.record(1953).unwrap().seasonal_total);
    }

    #[test]
    fn too_little_history_is_empty() {
        let ds = dataset(DatasetVariant::D1, 1950..=1950);
        assert_eq!(
            make_baseline_table(&ds, 2),
            Err(FeatureError::EmptyTable {
                variant: DatasetVariant::D1,
                lookback: 2
            })
        );
        assert_eq!(
            make_baseline_table(&ds, 6),
            Err(FeatureError::InvalidLookback(6))
        );
    }

    #[test]
    fn twenty_unique_tables() {
        let (rain, nino, iod) = full_inputs(1901..=1930);
        let years: Vec<i32> = (1902..=1930).collect();
        let tables = enumerate_baseline_datasets(&rain, &nino, &iod, &years, 1925).unwrap();
        assert_eq!(tables.len(), 20);
        let tags: HashSet<_> = tables.iter().map(|t| (t.variant, t.lookback)).collect();
        assert_eq!(tags.len(), 20);
        for t in &tables {
            let len = t.features[0].len();
            assert!(t.features.iter().all(|f| f.len() == len));
            assert_eq!(len, t.feature_len());
            if t.variant == DatasetVariant::D1 {
                assert_eq!(len % 122, 0);
            }
            assert!(t.years.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
