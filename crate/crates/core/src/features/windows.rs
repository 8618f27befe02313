use crate::features::{FeatureError, SeasonDataset, Split};
use crate::ingest::JJAS_DAYS;

/// Sliding windows cut from single seasons.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedBatch {
    pub w: usize,
    pub h: usize,
    pub channels: usize,
    /// Each input is `w` rows of `channels` values, row-major (day, channel).
    pub inputs: Vec<Vec<f64>>,
    /// Next `h` days of the rain channel.
    pub targets: Vec<Vec<f64>>,
    /// `(year, start offset)` per sample.
    pub origins: Vec<(i32, usize)>,
}

impl WindowedBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn per_year(w: usize, h: usize) -> usize {
        JJAS_DAYS + 1 - w - h
    }
}

fn check_geometry(w: usize, h: usize) -> Result<(), FeatureError> {
    if w == 0 || h == 0 {
        return Err(FeatureError::EmptyWindow);
    }
    if w + h > JJAS_DAYS {
        return Err(FeatureError::WindowTooLong { w, h });
    }
    Ok(())
}

/// Windows of every year in `split`.
pub fn make_windows(
    dataset: &SeasonDataset,
    w: usize,
    h: usize,
    split: Split,
) -> Result<WindowedBatch, FeatureError> {
    make_windows_for_years(dataset, w, h, &dataset.years_in(split))
}

/// Windows of the listed years, in list order; years absent from the dataset are skipped.
pub fn make_windows_for_years(
    dataset: &SeasonDataset,
    w: usize,
    h: usize,
    years: &[i32],
) -> Result<WindowedBatch, FeatureError> {
    check_geometry(w, h)?;
    let c = dataset.channels.len();
    let mut batch = WindowedBatch {
        w,
        h,
        channels: c,
        inputs: vec![],
        targets: vec![],
        origins: vec![],
    };
    for &year in years {
        let Some(r) = dataset.record(year) else {
            continue;
        };
        for s in 0..WindowedBatch::per_year(w, h) {
            let mut input = Vec::with_capacity(w * c);
            for t in s..s + w {
                input.extend(r.daily.iter().map(|ch| ch[t]));
            }
            batch.inputs.push(input);
            batch.targets.push(r.daily[0][s + w..s + w + h].to_vec());
            batch.origins.push((year, s));
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::features::dataset::tests::full_inputs;
    use crate::features::{build_season_dataset, DatasetVariant};

    fn dataset(
        variant: DatasetVariant,
        years: std::ops::RangeInclusive<i32>,
        boundary: i32,
    ) -> SeasonDataset {
        let (rain, nino, iod) = full_inputs(years.clone());
        let ys: Vec<i32> = years.collect();
        build_season_dataset(variant, &rain, &nino, &iod, &ys, boundary).unwrap()
    }

    #[test]
    fn window_counts() {
        let ds = dataset(DatasetVariant::D1, 1950..=1950, 1950);
        assert_eq!(make_windows(&ds, 30, 1, Split::Train).unwrap().len(), 92);
        assert_eq!(make_windows(&ds, 121, 1, Split::Train).unwrap().len(), 1);
        assert_eq!(
            make_windows(&ds, 100, 30, Split::Train),
            Err(FeatureError::WindowTooLong { w: 100, h: 30 })
        );
        assert_eq!(
            make_windows(&ds, 0, 1, Split::Train),
            Err(FeatureError::EmptyWindow)
        );
    }

    #[test]
    fn window_contents_follow_layout() {
        let ds = dataset(DatasetVariant::D4, 1950..=1951, 1951);
        let b = make_windows(&ds, 5, 2, Split::Train).unwrap();
        let (year, s) = b.origins[7];
        let r = ds.record(year).unwrap();
        for t in 0..5 {
            for c in 0..3 {
                assert_eq!(b.inputs[7][t * 3 + c], r.daily[c][s + t]);
            }
        }
        assert_eq!(b.targets[7], r.daily[0][s + 5..s + 7].to_vec());
    }

    proptest! {
        #[test]
        fn count_formula_and_no_year_crossing(w in 1usize..=121, h in 1usize..=121) {
            prop_assume!(w + h <= 122);
            let ds = dataset(DatasetVariant::D2, 1950..=1952, 1952);
            let b = make_windows(&ds, w, h, Split::Train).unwrap();
            prop_assert_eq!(b.len(), 3 * (122 - w - h + 1));
            for (i, &(year, s)) in b.origins.iter().enumerate() {
                prop_assert!(s + w + h <= 122);
                prop_assert_eq!(b.inputs[i].len(), w * 2);
                prop_assert_eq!(b.targets[i].len(), h);
                let r = ds.record(year).unwrap();
                prop_assert_eq!(&b.targets[i][..], &r.daily[0][s + w..s + w + h]);
            }
        }
    }
}
