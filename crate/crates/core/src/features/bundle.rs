//! Columnar CSV bundles: one file per tensor plus `manifest.json`.
//!
//! Season bundle files:
//! - `years.csv`: `year,split,seasonal_total`
//! - `daily_<channel>.csv`: `year,d0..d121`
//! - `prior_rain.csv`, `nino_window.csv`, `iod_window.csv`: `year,v0..` (only years that have them)
//!
//! Baseline bundle: `table.csv` with `year,split,target,f0..`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::{
    BaselineTable, Channel, DatasetVariant, FeatureError, SeasonDataset, Split, YearRecord,
};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub kind: String,
    pub variant: DatasetVariant,
    pub split_boundary: i32,
    pub w: Option<usize>,
    pub h: Option<usize>,
    pub lookback: Option<u8>,
    pub scaled: bool,
    pub channels: Vec<Channel>,
    pub files: Vec<String>,
}

fn bundle_err(e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Bundle(e.to_string())
}

fn matrix_csv<'a>(
    prefix: &str,
    width: usize,
    rows: impl Iterator<Item = (String, &'a [f64])>,
) -> String {
    let mut out = String::from("year");
    for i in 0..width {
        let _ = write!(out, ",{prefix}{i}");
    }
    out.push('\n');
    for (key, values) in rows {
        out.push_str(&key);
        for v in values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

type KeyedRow = (Vec<String>, Vec<f64>);
type RecordSetter = Box<dyn FnMut(&mut YearRecord, Vec<f64>)>;

/// Rows of `key, values...` keyed by the first `key_cols` fields.
fn parse_rows(text: &str, key_cols: usize) -> Result<Vec<KeyedRow>, FeatureError> {
    let mut lines = text.lines();
    let width = lines
        .next()
        .ok_or_else(|| bundle_err("empty file"))?
        .split(',')
        .count();
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(bundle_err(format!(
                    "row {} has {} fields, expected {width}",
                    i + 2,
                    fields.len()
                )));
            }
            let values = fields[key_cols..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| bundle_err(format!("row {}: {e}", i + 2)))
                })
                .collect::<Result<_, _>>()?;
            Ok((
                fields[..key_cols].iter().map(|s| s.to_string()).collect(),
                values,
            ))
        })
        .collect()
}

fn parse_year(s: &str) -> Result<i32, FeatureError> {
    s.parse().map_err(|_| bundle_err(format!("bad year {s:?}")))
}

fn parse_split(s: &str) -> Result<Split, FeatureError> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(bundle_err(format!("bad split {other:?}"))),
    }
}

fn write_files(
    dir: &Path,
    manifest: &BundleManifest,
    files: &[(String, String)],
) -> Result<(), FeatureError> {
    fs::create_dir_all(dir).map_err(bundle_err)?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(bundle_err)?;
    }
    let json = serde_json::to_string_pretty(manifest).map_err(bundle_err)?;
    fs::write(dir.join("manifest.json"), json + "\n").map_err(bundle_err)
}

fn read_manifest(dir: &Path, kind: &str) -> Result<BundleManifest, FeatureError> {
    let text = fs::read_to_string(dir.join("manifest.json")).map_err(bundle_err)?;
    let m: BundleManifest = serde_json::from_str(&text).map_err(bundle_err)?;
    if m.version != BUNDLE_VERSION || m.kind != kind {
        return Err(bundle_err(format!(
            "expected {kind} bundle v{BUNDLE_VERSION}, found {} v{}",
            m.kind, m.version
        )));
    }
    Ok(m)
}

fn read(dir: &Path, name: &str) -> Result<String, FeatureError> {
    fs::read_to_string(dir.join(name)).map_err(|e| bundle_err(format!("{name}: {e}")))
}

pub fn write_season_bundle(
    dir: &Path,
    ds: &SeasonDataset,
    w: Option<usize>,
    h: Option<usize>,
) -> Result<BundleManifest, FeatureError> {
    let mut files = Vec::new();
    let mut years = String::from("year,split,seasonal_total\n");
    for r in &ds.records {
        let _ = writeln!(
            years,
            "{},{},{}",
            r.year,
            r.split.as_str(),
            r.seasonal_total
        );
    }
    files.push(("years.csv".to_string(), years));
    for (ci, c) in ds.channels.iter().enumerate() {
        let rows = ds
            .records
            .iter()
            .map(|r| (r.year.to_string(), r.daily[ci].as_slice()));
        files.push((
            format!("daily_{}.csv", c.name()),
            matrix_csv("d", 122, rows),
        ));
    }
    type Pick = fn(&YearRecord) -> &Option<Vec<f64>>;
    let optional: [(&str, usize, Pick); 3] = [
        ("prior_rain.csv", 122, |r| &r.prior_season),
        ("nino_window.csv", 13, |r| &r.nino_window),
        ("iod_window.csv", 12, |r| &r.iod_window),
    ];
    for (name, width, pick) in optional {
        if ds.records.iter().any(|r| pick(r).is_some()) {
            let rows = ds
                .records
                .iter()
                .filter_map(|r| pick(r).as_ref().map(|v| (r.year.to_string(), v.as_slice())));
            files.push((name.to_string(), matrix_csv("v", width, rows)));
        }
    }
    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        kind: "season".into(),
        variant: ds.variant,
        split_boundary: ds.split_boundary,
        w,
        h,
        lookback: None,
        scaled: ds.scaled,
        channels: ds.channels.clone(),
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    write_files(dir, &manifest, &files)?;
    Ok(manifest)
}

pub fn read_season_bundle(dir: &Path) -> Result<(SeasonDataset, BundleManifest), FeatureError> {
    let m = read_manifest(dir, "season")?;
    let mut records = Vec::new();
    for (key, v) in parse_rows(&read(dir, "years.csv")?, 2)? {
        records.push(YearRecord {
            year: parse_year(&key[0])?,
            split: parse_split(&key[1])?,
            seasonal_total: v[0],
            daily: Vec::new(),
            nino_window: None,
            iod_window: None,
            prior_season: None,
        });
    }
    let index: BTreeMap<i32, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.year, i))
        .collect();
    let mut load = |name: &str, mut put: RecordSetter| -> Result<(), FeatureError> {
        for (key, v) in parse_rows(&read(dir, name)?, 1)? {
            let year = parse_year(&key[0])?;
            let &i = index
                .get(&year)
                .ok_or_else(|| bundle_err(format!("{name}: year {year} not in years.csv")))?;
            put(&mut records[i], v);
        }
        Ok(())
    };
    for c in &m.channels {
        load(
            &format!("daily_{}.csv", c.name()),
            Box::new(|r, v| r.daily.push(v)),
        )?;
    }
    for name in &m.files {
        match name.as_str() {
            "prior_rain.csv" => load(name, Box::new(|r, v| r.prior_season = Some(v)))?,
            "nino_window.csv" => load(name, Box::new(|r, v| r.nino_window = Some(v)))?,
            "iod_window.csv" => load(name, Box::new(|r, v| r.iod_window = Some(v)))?,
            _ => {}
        }
    }
    if let Some(r) = records.iter().find(|r| r.daily.len() != m.channels.len()) {
        return Err(bundle_err(format!("year {} lacks some channels", r.year)));
    }
    let ds = SeasonDataset {
        variant: m.variant,
        channels: m.channels.clone(),
        split_boundary: m.split_boundary,
        records,
        scaled: m.scaled,
    };
    Ok((ds, m))
}

pub fn write_baseline_bundle(
    dir: &Path,
    table: &BaselineTable,
    split_boundary: i32,
) -> Result<BundleManifest, FeatureError> {
    let mut body = String::from("year,split,target");
    for i in 0..table.feature_len() {
        let _ = write!(body, ",f{i}");
    }
    body.push('\n');
    for i in 0..table.len() {
        let _ = write!(
            body,
            "{},{},{}",
            table.years[i],
            table.splits[i].as_str(),
            table.targets[i]
        );
        for v in &table.features[i] {
            let _ = write!(body, ",{v}");
        }
        body.push('\n');
    }
    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        kind: "baseline".into(),
        variant: table.variant,
        split_boundary,
        w: None,
        h: None,
        lookback: Some(table.lookback),
        scaled: false,
        channels: vec![Channel::Rain],
        files: vec!["table.csv".into()],
    };
    write_files(dir, &manifest, &[("table.csv".to_string(), body)])?;
    Ok(manifest)
}

pub fn read_baseline_bundle(dir: &Path) -> Result<BaselineTable, FeatureError> {
    let m = read_manifest(dir, "baseline")?;
    let lookback = m
        .lookback
        .ok_or_else(|| bundle_err("baseline manifest lacks lookback"))?;
    let mut t = BaselineTable {
        variant: m.variant,
        lookback,
        years: vec![],
        splits: vec![],
        features: vec![],
        targets: vec![],
    };
    for (key, mut v) in parse_rows(&read(dir, "table.csv")?, 2)? {
        t.years.push(parse_year(&key[0])?);
        t.splits.push(parse_split(&key[1])?);
        t.targets.push(v.remove(0));
        t.features.push(v);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::dataset::tests::full_inputs;
    use crate::features::{apply_scaler, build_season_dataset, fit_scaler, make_baseline_table};

    #[test]
    fn season_bundle_round_trips_bitwise() {
        let (rain, nino, iod) = full_inputs(1950..=1956);
        let years: Vec<i32> = (1950..=1956).collect();
        let ds =
            build_season_dataset(DatasetVariant::D4, &rain, &nino, &iod, &years, 1954).unwrap();
        let scaled = apply_scaler(&fit_scaler(&ds).unwrap(), &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_season_bundle(dir.path(), &scaled, Some(30), Some(1)).unwrap();
        assert_eq!(m.w, Some(30));
        let (back, m2) = read_season_bundle(dir.path()).unwrap();
        assert_eq!(back, scaled);
        assert_eq!(m, m2);
        assert!(back.records[0].prior_season.is_none());
    }

    #[test]
    fn baseline_bundle_round_trips() {
        let (rain, nino, iod) = full_inputs(1950..=1956);
        let years: Vec<i32> = (1950..=1956).collect();
        let ds =
            build_season_dataset(DatasetVariant::D3, &rain, &nino, &iod, &years, 1954).unwrap();
        let t = make_baseline_table(&ds, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_baseline_bundle(dir.path(), &t, 1954).unwrap();
        assert_eq!(read_baseline_bundle(dir.path()).unwrap(), t);
        assert!(read_season_bundle(dir.path()).is_err());
    }
}
