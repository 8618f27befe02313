//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#[path = "../../core/tests/support/fd.rs"]
mod fd;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use monsoon_cli::pipeline::{
    fit, forecast, forecast_record, prepare, score_test_years, season_dataset, NetSpec,
};
use monsoon_cli::store::Store;
use monsoon_core::autodiff::RngState;
use monsoon_core::evaluation::{rank, rmse_percent, spearman, Climatology};
use monsoon_core::features::{
    enumerate_baseline_datasets, make_windows, Channel, DatasetVariant, Split, WindowedBatch,
};
use monsoon_core::ingest::{validate_coverage, MonthlyIndexSeries};
use monsoon_core::models::{
    gbt_fit, gbt_predict, ols_fit, svr_fit, GbtConfig, Network, OlsConfig, SvrConfig,
};
use monsoon_core::synthetic::{generate, SyntheticConfig, SyntheticData};
use monsoon_core::training::{save_checkpoint, TrainConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_monsoon")
}

fn monsoon(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn monsoon");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap_or(-1), text)
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure!(took <= limit, "{what} took {took:.1?}, limit {limit:?}");
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = RngState::seeded(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = 2 + (rng.uniform() * 49.0) as usize;
        let a: Vec<f64> = rng
            .permutation(n)
            .into_iter()
            .map(|i| i as f64 + 0.5 * rng.uniform())
            .collect();
        let b: Vec<f64> = rng
            .permutation(n)
            .into_iter()
            .map(|i| 10.0 * i as f64 - 3.0)
            .collect();
        let got = spearman(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - pearson(&rank(&a), &rank(&b))).abs());
    }
    ensure!(
        worst <= 1e-12,
        "spearman differs from rank Pearson by {worst:e}"
    );
    let examples = [
        (spearman(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]), 1.0f64),
        (spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0),
        (spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]), 0.6),
    ];
    for (got, want) in examples {
        let got = got.map_err(|e| e.to_string())?;
        ensure!(got == want, "spearman example gave {got}, expected {want}");
    }
    let rmse = [
        (rmse_percent(&[850.0, 910.0], &[850.0, 910.0]), 0.0f64),
        (rmse_percent(&[100.0], &[90.0]), 1.0),
        (rmse_percent(&[100.0, 200.0], &[110.0, 180.0]), 1.0),
    ];
    for (got, want) in rmse {
        let got = got.map_err(|e| e.to_string())?;
        ensure!(
            (got - want).abs() <= 1e-12,
            "rmse_percent gave {got}, expected {want}"
        );
    }
    within(start, Duration::from_secs(5), "metric oracles")?;
    Ok(format!("max |spearman - rank pearson| = {worst:.1e}"))
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let cases = fd::op_cases();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        match fd::check(c, 1000 + k as u64) {
            Ok(err) => worst = worst.max(err),
            Err(e) => failures.push(e),
        }
    }
    ensure!(
        failures.is_empty(),
        "{} ops failed: {}",
        failures.len(),
        failures.join("; ")
    );
    within(start, Duration::from_secs(60), "gradient suite")?;
    Ok(format!(
        "{} ops x {} points within tolerance, worst relative error {worst:.1e} (differences under {:.0e} skipped)",
        cases.len(),
        fd::POINTS,
        fd::ABS_TOL
    ))
}

/// Solves the normal equations of `[1 | x]` by Gaussian elimination with partial pivoting.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len() + 1;
    let row = |r: &Vec<f64>| {
        std::iter::once(1.0)
            .chain(r.iter().copied())
            .collect::<Vec<_>>()
    };
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &t) in x.iter().zip(y) {
        let z = row(r);
        for i in 0..p {
            for j in 0..p {
                a[i][j] += z[i] * z[j];
            }
            a[i][p] += z[i] * t;
        }
    }
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for k in c..=p {
                    row[k] -= f * pivot[k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

fn baseline_oracles() -> Outcome {
    let mut rng = RngState::seeded(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = 1 + (rng.uniform() * 6.0) as usize;
        let n = 3 * p + 10;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.normal()).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| {
                2.0 + r
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (j as f64 - 1.5) * v)
                    .sum::<f64>()
                    + 0.3 * rng.normal()
            })
            .collect();
        let m = ols_fit(&x, &y, &OlsConfig::default()).map_err(|e| e.to_string())?;
        let want = normal_equations(&x, &y);
        let got: Vec<f64> = std::iter::once(m.intercept)
            .chain(m.coefficients.iter().copied())
            .collect();
        let scale = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / scale);
    }
    ensure!(
        worst <= 1e-8,
        "OLS differs from the normal equations by {worst:e} (relative)"
    );

    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { 5.0 }).collect();
    let mean = y.iter().sum::<f64>() / 8.0;
    let flat = gbt_fit(
        &x,
        &y,
        &GbtConfig {
            max_depth: 0,
            rounds: 5,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        x.iter().all(|r| gbt_predict(&flat, r) == mean),
        "depth-0 ensemble does not predict the mean"
    );
    let frozen = gbt_fit(
        &x,
        &y,
        &GbtConfig {
            eta: 0.0,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        x.iter()
            .all(|r| gbt_predict(&frozen, r) == frozen.base_score),
        "eta = 0 does not return the base score"
    );
    ensure!(
        frozen.base_score == mean,
        "base score {} is not the target mean {mean}",
        frozen.base_score
    );
    let stump = gbt_fit(
        &x,
        &y,
        &GbtConfig {
            max_depth: 1,
            rounds: 1,
            eta: 1.0,
            min_leaf: 1,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        x.iter().zip(&y).all(|(r, t)| gbt_predict(&stump, r) == *t),
        "a single full-step stump does not fit the step exactly"
    );

    let sx = vec![vec![0.0], vec![1.0], vec![2.0]];
    let sy = vec![1.0, 2.5, 2.0];
    let svr = svr_fit(&sx, &sy, &SvrConfig::default()).map_err(|e| e.to_string())?;
    let h = &svr.objective_history;
    ensure!(h.len() > 1, "no SVR objective history");
    if let Some(i) = h.windows(2).position(|w| w[1] > w[0]) {
        return Err(format!(
            "SVR objective rose at iterate {}: {} -> {}",
            i + 1,
            h[i],
            h[i + 1]
        ));
    }
    Ok(format!("OLS worst relative error {worst:.1e}; GBT identities exact; SVR objective monotone over {} iterates", h.len()))
}

fn synthetic_store() -> (SyntheticData, Store, i32) {
    let data = generate(&SyntheticConfig::default());
    let store = Store::from_synthetic(&data);
    let boundary = data.target_years[0] + 104;
    (data, store, boundary)
}

struct Signal {
    d4_rmse: f64,
    d1: monsoon_cli::pipeline::Fitted,
    d1_rmse: f64,
}

fn synthetic_signal(shared: &mut Option<Signal>) -> Outcome {
    let start = Instant::now();
    let (data, store, boundary) = synthetic_store();
    let (spec, cfg) = (NetSpec::default(), TrainConfig::default());
    let d4 =
        fit(&store, DatasetVariant::D4, &spec, &cfg, boundary).map_err(|e| format!("{e:#}"))?;
    let scores = score_test_years(&d4).map_err(|e| format!("{e:#}"))?;
    ensure!(
        scores.years.len() == 15,
        "expected 15 test years, got {}",
        scores.years.len()
    );
    ensure!(
        scores.years[0] == data.target_years[105],
        "test block starts at {}",
        scores.years[0]
    );
    let rho = spearman(&scores.observed, &scores.predicted).map_err(|e| e.to_string())?;
    let rmse = rmse_percent(&scores.observed, &scores.predicted).map_err(|e| e.to_string())?;
    let lpa = vec![d4.card.climatology.lpa; scores.observed.len()];
    let clim = rmse_percent(&scores.observed, &lpa).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let d1 =
        fit(&store, DatasetVariant::D1, &spec, &cfg, boundary).map_err(|e| format!("{e:#}"))?;
    let d1_scores = score_test_years(&d1).map_err(|e| format!("{e:#}"))?;
    let d1_rmse =
        rmse_percent(&d1_scores.observed, &d1_scores.predicted).map_err(|e| e.to_string())?;
    *shared = Some(Signal {
        d4_rmse: rmse,
        d1,
        d1_rmse,
    });
    ensure!(rho >= 0.8, "Spearman {rho:.4} < 0.8");
    ensure!(
        rmse < clim,
        "rmse% {rmse:.4} is not below climatology {clim:.4}"
    );
    ensure!(
        took <= Duration::from_secs(600),
        "D4 training and scoring took {took:.1?}"
    );
    Ok(format!(
        "Spearman {rho:.4}, rmse% {rmse:.4} vs climatology {clim:.4}, {took:.1?}"
    ))
}

fn perturbed(series: &MonthlyIndexSeries, shift: f64) -> MonthlyIndexSeries {
    let mut out = MonthlyIndexSeries::new("perturbed", -99.99);
    for ((y, m), v) in series.iter() {
        out.insert(y, m, -v + shift + 0.1 * m as f64)
            .expect("finite");
    }
    out
}

fn variant_sensitivity(shared: &Option<Signal>) -> Outcome {
    let sig = shared
        .as_ref()
        .ok_or("the synthetic-signal models were not trained")?;
    ensure!(
        sig.d4_rmse <= sig.d1_rmse,
        "D4 rmse% {:.4} > D1 rmse% {:.4}",
        sig.d4_rmse,
        sig.d1_rmse
    );
    let (_, store, _) = synthetic_store();
    let (pos, neg) = store.iod_thresholds;
    let other = Store::new(
        store.rain.clone(),
        perturbed(&store.nino, 1.3),
        perturbed(&store.dmi, 0.45),
        pos,
        neg,
    )
    .map_err(|e| e.to_string())?;
    let d1 = &sig.d1;
    let years: Vec<i32> = d1.dataset.years_in(Split::Test);
    let run = |s: &Store| -> Result<Vec<Vec<u64>>, String> {
        let records = years
            .iter()
            .map(|&y| forecast_record(s, &d1.card, y))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let refs: Vec<_> = records.iter().collect();
        let out = forecast(&d1.card, &d1.net, &refs).map_err(|e| format!("{e:#}"))?;
        Ok(out
            .into_iter()
            .map(|(daily, total)| daily.iter().chain([&total]).map(|v| v.to_bits()).collect())
            .collect())
    };
    ensure!(
        run(&store)? == run(&other)?,
        "D1 rollout changed when the exogenous indices changed"
    );
    let a = season_dataset(&store, DatasetVariant::D1, d1.card.split_boundary)
        .map_err(|e| e.to_string())?;
    let b = season_dataset(&other, DatasetVariant::D1, d1.card.split_boundary)
        .map_err(|e| e.to_string())?;
    ensure!(
        a.records == b.records,
        "D1 dataset depends on the exogenous indices"
    );
    Ok(format!("D4 rmse% {:.4} <= D1 rmse% {:.4}; D1 rollout bit-identical under perturbed indices over {} years", sig.d4_rmse, sig.d1_rmse, years.len()))
}

fn write_synthetic_store(dir: &Path, years: usize) -> Result<PathBuf, String> {
    let data = generate(&SyntheticConfig {
        years,
        ..Default::default()
    });
    let path = dir.join("store");
    Store::from_synthetic(&data)
        .write(&path)
        .map_err(|e| e.to_string())?;
    Ok(path)
}

fn pipeline_counts() -> Outcome {
    let data = generate(&SyntheticConfig {
        first_year: 1901,
        years: 123,
        ..Default::default()
    });
    let tables =
        enumerate_baseline_datasets(&data.rain, &data.nino, &data.iod, &data.target_years, 2010)
            .map_err(|e| e.to_string())?;
    ensure!(
        tables.len() == 20,
        "{} baseline tables, expected 20",
        tables.len()
    );
    let mut keys: Vec<_> = tables
        .iter()
        .map(|t| (t.variant.tag(), t.lookback))
        .collect();
    keys.sort();
    keys.dedup();
    ensure!(
        keys.len() == 20,
        "baseline tables are not distinct (variant, lookback) pairs"
    );

    let store = Store::from_synthetic(&data);
    let years: Vec<i32> =
        validate_coverage(&store.rain, &store.nino, &store.iod, store.rain.years())
            .complete_years(DatasetVariant::D4.requirements(true));
    ensure!(
        years.first() == Some(&1901) && years.last() == Some(&2023),
        "usable years {:?}..{:?}",
        years.first(),
        years.last()
    );
    let ds = season_dataset(&store, DatasetVariant::D4, 2010).map_err(|e| e.to_string())?;
    let (train, test) = (
        ds.years_in(Split::Train).len(),
        ds.years_in(Split::Test).len(),
    );
    ensure!(
        (train, test) == (110, 13),
        "split {train}/{test}, expected 110/13"
    );

    let small = season_dataset(
        &Store::from_synthetic(&generate(&SyntheticConfig {
            years: 3,
            ..Default::default()
        })),
        DatasetVariant::D2,
        1901,
    )
    .map_err(|e| e.to_string())?;
    let mut rng = RngState::seeded(21);
    for _ in 0..200 {
        let w = 1 + (rng.uniform() * 100.0) as usize;
        let h = 1 + (rng.uniform() * (121 - w) as f64) as usize;
        let b: WindowedBatch =
            make_windows(&small, w, h, Split::Train).map_err(|e| e.to_string())?;
        ensure!(
            b.len() == 122 - w - h + 1,
            "W={w} H={h}: {} windows, expected {}",
            b.len(),
            122 - w - h + 1
        );
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store_dir = write_synthetic_store(tmp.path(), 24)?;
    let run_dir = tmp.path().join("bench");
    let (code, out) = monsoon(&[
        "benchmark",
        "--store",
        p(&store_dir),
        "--only",
        "patchtst",
        "--epochs",
        "1",
        "--split-boundary",
        "1918",
        "--run-dir",
        p(&run_dir),
    ]);
    ensure!(code == 0, "benchmark exited {code}: {out}");
    let csv = std::fs::read_to_string(run_dir.join("comparison.csv")).map_err(|e| e.to_string())?;
    let rows = csv.lines().filter(|l| l.starts_with("PatchTST,")).count();
    ensure!(rows == 4, "benchmark wrote {rows} PatchTST rows");
    Ok("20 tables; 4 PatchTST rows; 200 random (W, H) window counts; 110/13 split".into())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = write_synthetic_store(tmp.path(), 30)?;
    let train = |name: &str| -> Result<PathBuf, String> {
        let dir = tmp.path().join(name);
        let (code, out) = monsoon(&[
            "train",
            "--store",
            p(&store),
            "--variant",
            "D4",
            "--seed",
            "7",
            "--epochs",
            "6",
            "--split-boundary",
            "1922",
            "--run-dir",
            p(&dir),
        ]);
        ensure!(code == 0, "train exited {code}: {out}");
        Ok(dir)
    };
    let (a, b) = (train("a")?, train("b")?);
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).map_err(|e| e.to_string());
    let losses = |d: &Path| -> Result<Vec<f64>, String> {
        let text = String::from_utf8(read(d, "loss.csv")?).map_err(|e| e.to_string())?;
        Ok(text
            .lines()
            .skip(1)
            .flat_map(|l| {
                l.split(',')
                    .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                    .collect::<Vec<_>>()
            })
            .collect())
    };
    let (la, lb) = (losses(&a)?, losses(&b)?);
    ensure!(
        !la.is_empty() && la.len() == lb.len(),
        "loss files have {} and {} values",
        la.len(),
        lb.len()
    );
    let worst = la
        .iter()
        .zip(&lb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 1e-10, "loss CSVs differ by {worst:e}");
    ensure!(
        read(&a, "model.ckpt")? == read(&b, "model.ckpt")?,
        "checkpoints differ"
    );
    Ok(format!(
        "{} loss values within {worst:.0e}; checkpoints bitwise identical",
        la.len()
    ))
}

fn report_fixture() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = generate(&SyntheticConfig {
        years: 20,
        ..Default::default()
    });
    let store = Store::from_synthetic(&data);
    let store_dir = tmp.path().join("store");
    store.write(&store_dir).map_err(|e| e.to_string())?;
    let spec = NetSpec::default();
    let cfg = TrainConfig::default();
    let prep = prepare(
        &store,
        DatasetVariant::D1,
        &spec,
        &cfg,
        data.target_years[14],
    )
    .map_err(|e| format!("{e:#}"))?;
    let mut card = prep.card(&spec, &cfg);
    card.climatology = Climatology {
        lpa: 880.0,
        t1: 850.0,
        t2: 910.0,
    };
    let mut net = card.build().map_err(|e| e.to_string())?;
    let daily = card
        .scaler
        .scale(Channel::Rain, 921.6 / 122.0)
        .map_err(|e| e.to_string())?;
    let ps = net.params_mut();
    ps.get_mut("head.w")
        .ok_or("no head.w")?
        .data_mut()
        .fill(0.0);
    ps.get_mut("head.b")
        .ok_or("no head.b")?
        .data_mut()
        .fill(daily);
    let ckpt = tmp.path().join("fixture.ckpt");
    save_checkpoint(&ckpt, net.params(), &card).map_err(|e| e.to_string())?;

    let year = *data.target_years.last().unwrap() + 1;
    let out_dir = tmp.path().join("predict");
    let year_s = year.to_string();
    let (code, out) = monsoon(&[
        "predict",
        "--year",
        &year_s,
        "--checkpoint",
        p(&ckpt),
        "--store",
        p(&store_dir),
        "--run-dir",
        p(&out_dir),
    ]);
    ensure!(code == 0, "predict exited {code}: {out}");
    let json: serde_json::Value = serde_json::from_slice(
        &std::fs::read(out_dir.join("report.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let total = json["total_mm"].as_f64().ok_or("no total")?;
    ensure!((total - 921.6).abs() < 1e-6, "total {total}");
    ensure!(
        json["category"] == "above_normal",
        "category {}",
        json["category"]
    );
    ensure!(json["year"] == year, "year {}", json["year"]);
    ensure!(
        json["daily_mm"].as_array().map(Vec::len) == Some(122),
        "daily series length"
    );
    let text = std::fs::read_to_string(out_dir.join("report.txt")).map_err(|e| e.to_string())?;
    ensure!(
        text.contains("921.6 mm") && text.contains("above_normal"),
        "report text: {text}"
    );
    ensure!(
        text.contains("three months before 1 June"),
        "no lead-time note in: {text}"
    );
    for f in ["daily.csv", "manifest.json"] {
        ensure!(out_dir.join(f).exists(), "missing {f}");
    }

    let (code, out) = monsoon(&[
        "predict",
        "--year",
        &(year + 5).to_string(),
        "--checkpoint",
        p(&ckpt),
        "--store",
        p(&store_dir),
        "--run-dir",
        p(&tmp.path().join("x")),
    ]);
    ensure!(
        code == 4,
        "forecast without a seed season exited {code}: {out}"
    );
    Ok(format!("{total:.1} mm -> above_normal with lead-time note"))
}

fn main() {
    let mut shared = None;
    let mut failed = 0;
    let mut report = |name: &str, outcome: std::thread::Result<Outcome>| {
        let line = match outcome {
            Ok(Ok(detail)) => format!("PASS criterion {name}: {detail}"),
            Ok(Err(why)) => format!("FAIL criterion {name}: {why}"),
            Err(_) => format!("FAIL criterion {name}: panicked"),
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("{line}");
    };
    report("1 metric oracles", catch_unwind(metric_oracles));
    report("2 gradient suite", catch_unwind(gradient_suite));
    report("3 baseline oracles", catch_unwind(baseline_oracles));
    report(
        "4 synthetic signal",
        catch_unwind(AssertUnwindSafe(|| synthetic_signal(&mut shared))),
    );
    report(
        "5 variant sensitivity",
        catch_unwind(AssertUnwindSafe(|| variant_sensitivity(&shared))),
    );
    report(
        "6 pipeline counts",
        catch_unwind(AssertUnwindSafe(pipeline_counts)),
    );
    report("7 determinism", catch_unwind(AssertUnwindSafe(determinism)));
    report(
        "8 report fixture",
        catch_unwind(AssertUnwindSafe(report_fixture)),
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
