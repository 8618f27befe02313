use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::season::AnomalySeries;
use crate::scalar::Scalar;

pub const COMPARISON_HEADER: &str = "model,variant,lookback,spearman,rmse_percent";
pub const ANOMALY_HEADER: &str = "year,obs_total_mm,pred_total_mm,obs_anom_mm,pred_anom_mm";

/// Metrics of one trained model on the evaluation years. A failed trial
/// carries `error` and no metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub model: String,
    pub variant: String,
    pub lookback: Option<u8>,
    pub rmse_percent: Option<T>,
    pub spearman: Option<T>,
    pub n: usize,
    pub error: Option<String>,
}

impl<T: Scalar> MetricReport<T> {
    pub fn success(
        model: &str,
        variant: &str,
        lookback: Option<u8>,
        rmse_percent: T,
        spearman: T,
        n: usize,
    ) -> Self {
        Self {
            model: model.into(),
            variant: variant.into(),
            lookback,
            rmse_percent: Some(rmse_percent),
            spearman: Some(spearman),
            n,
            error: None,
        }
    }

    pub fn failure(
        model: &str,
        variant: &str,
        lookback: Option<u8>,
        error: impl Into<String>,
    ) -> Self {
        Self {
            model: model.into(),
            variant: variant.into(),
            lookback,
            rmse_percent: None,
            spearman: None,
            n: 0,
            error: Some(error.into()),
        }
    }

    fn key(&self) -> (String, String, Option<u8>) {
        (self.model.clone(), self.variant.clone(), self.lookback)
    }
}

/// Rows keyed by (model, variant, lookback), sorted by RMSE% ascending with
/// failed rows last.
pub fn build_comparison_table<T: Scalar>(reports: &[MetricReport<T>]) -> Vec<MetricReport<T>> {
    let mut by_key: BTreeMap<(String, String, Option<u8>), MetricReport<T>> = BTreeMap::new();
    for r in reports {
        if let Some(prev) = by_key.insert(r.key(), r.clone()) {
            log::warn!(
                "duplicate comparison row {:?}; keeping the later report",
                prev.key()
            );
        }
    }
    let mut rows: Vec<_> = by_key.into_values().collect();
    rows.sort_by(|a, b| match (a.rmse_percent, b.rmse_percent) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}

fn cell<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| format!("{:.6}", x.as_f64())).unwrap_or_default()
}

pub fn comparison_csv<T: Scalar>(rows: &[MetricReport<T>]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let lookback = r.lookback.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.model,
            r.variant,
            lookback,
            cell(r.spearman),
            cell(r.rmse_percent)
        );
    }
    out
}

pub fn anomaly_csv<T: Scalar>(series: &AnomalySeries<T>) -> String {
    let mut out = String::from(ANOMALY_HEADER);
    out.push('\n');
    for r in &series.rows {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3}",
            r.year,
            r.obs_total.as_f64(),
            r.pred_total.as_f64(),
            r.obs_anomaly.as_f64(),
            r.pred_anomaly.as_f64()
        );
    }
    out
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
];

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    s
}

fn axes(s: &mut String, xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN / 2.0, MARGIN / 1.5);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{xlabel}</text>"#,
        (x0 + x1) / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
}

/// Scatter of Spearman (x) against RMSE% (y), one colour per model.
pub fn comparison_svg<T: Scalar>(rows: &[MetricReport<T>]) -> String {
    let mut s = svg_open("Model comparison");
    axes(&mut s, "Spearman correlation", "RMSE (%)");
    let ok: Vec<_> = rows
        .iter()
        .filter(|r| r.spearman.is_some() && r.rmse_percent.is_some())
        .collect();
    let ymax = ok
        .iter()
        .map(|r| r.rmse_percent.unwrap().as_f64())
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.1;
    let models: Vec<&str> = {
        let mut m: Vec<&str> = ok.iter().map(|r| r.model.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    let (pw, ph) = (W - MARGIN * 1.5, H - MARGIN - MARGIN / 1.5);
    for r in &ok {
        let x = MARGIN + (r.spearman.unwrap().as_f64() + 1.0) / 2.0 * pw;
        let y = H - MARGIN - r.rmse_percent.unwrap().as_f64() / ymax * ph;
        let colour = PALETTE[models.iter().position(|m| *m == r.model).unwrap() % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{colour}"><title>{} {} {}</title></circle>"#,
            r.model,
            r.variant,
            r.lookback.map(|l| l.to_string()).unwrap_or_default()
        );
    }
    for (i, m) in models.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/>"#,
            W - 140.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{m}</text>"#,
            W - 130.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars of observed and predicted anomalies per year.
pub fn anomaly_svg<T: Scalar>(series: &AnomalySeries<T>) -> String {
    let mut s = svg_open("Seasonal rainfall anomaly");
    axes(&mut s, "Year", "Anomaly (mm)");
    let amax = series
        .rows
        .iter()
        .flat_map(|r| [r.obs_anomaly.as_f64().abs(), r.pred_anomaly.as_f64().abs()])
        .fold(0.0, f64::max)
        .max(1e-9);
    let (pw, ph) = (W - MARGIN * 1.5, H - MARGIN - MARGIN / 1.5);
    let zero = H - MARGIN - ph / 2.0;
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="gray" stroke-dasharray="4 2"/>"#,
        W - MARGIN / 2.0
    );
    let slot = pw / series.rows.len().max(1) as f64;
    for (i, r) in series.rows.iter().enumerate() {
        for (j, (v, colour)) in [(r.obs_anomaly, PALETTE[0]), (r.pred_anomaly, PALETTE[1])]
            .into_iter()
            .enumerate()
        {
            let hgt = v.as_f64() / amax * ph / 2.0;
            let x = MARGIN + slot * i as f64 + slot * (0.1 + 0.4 * j as f64);
            let (y, hh) = if hgt >= 0.0 {
                (zero - hgt, hgt)
            } else {
                (zero, -hgt)
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{hh:.2}" fill="{colour}"/>"#,
                slot * 0.38
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="9" text-anchor="middle">{}</text>"#,
            MARGIN + slot * (i as f64 + 0.5),
            H - MARGIN + 12.0,
            r.year
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Files written by [`emit_comparison`] / [`emit_anomalies`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn emit_comparison<T: Scalar>(
    rows: &[MetricReport<T>],
    stem: &Path,
) -> std::io::Result<PlotFiles> {
    let csv = stem.with_extension("csv");
    let svg = stem.with_extension("svg");
    fs::write(&csv, comparison_csv(rows))?;
    fs::write(&svg, comparison_svg(rows))?;
    Ok(PlotFiles {
        csv,
        svg: Some(svg),
    })
}

/// Writes `<stem>.csv` and, for a non-empty series, `<stem>.svg`.
pub fn emit_anomalies<T: Scalar>(
    series: &AnomalySeries<T>,
    stem: &Path,
) -> std::io::Result<PlotFiles> {
    let csv = stem.with_extension("csv");
    fs::write(&csv, anomaly_csv(series))?;
    if series.is_empty() {
        return Ok(PlotFiles { csv, svg: None });
    }
    let svg = stem.with_extension("svg");
    fs::write(&svg, anomaly_svg(series))?;
    Ok(PlotFiles {
        csv,
        svg: Some(svg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::anomaly_series;

    fn rows() -> Vec<MetricReport<f64>> {
        vec![
            MetricReport::success("ols", "D1", Some(2), 4.0, 0.3, 13),
            MetricReport::success("patchtst", "D4", None, 1.5, 0.9, 13),
            MetricReport::failure("svr", "D2", Some(1), "diverged"),
            MetricReport::success("ols", "D1", Some(2), 3.0, 0.4, 13),
        ]
    }

    #[test]
    fn duplicate_keys_keep_later_report_and_sort_by_rmse() {
        let t = build_comparison_table(&rows());
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].model, "patchtst");
        assert_eq!(t[1].rmse_percent, Some(3.0));
        assert!(t[2].error.is_some());
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let t = build_comparison_table(&rows());
        let csv = comparison_csv(&t);
        assert_eq!(csv.lines().next(), Some(COMPARISON_HEADER));
        assert_eq!(csv.lines().count() - 1, t.len());
        assert!(csv.contains("patchtst,D4,,0.900000,1.500000"));
    }

    #[test]
    fn svg_is_byte_stable() {
        let t = build_comparison_table(&rows());
        assert_eq!(comparison_svg(&t), comparison_svg(&t));
    }

    #[test]
    fn empty_anomalies_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let series = anomaly_series::<f64>(&[], &[], &[], 880.0).unwrap();
        let files = emit_anomalies(&series, &dir.path().join("anom")).unwrap();
        assert!(files.svg.is_none());
        assert_eq!(
            fs::read_to_string(files.csv).unwrap(),
            format!("{ANOMALY_HEADER}\n")
        );
    }
}
