use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use monsoon_core::ingest::cache_path;
use monsoon_core::synthetic::{generate, SyntheticConfig};
use tempfile::TempDir;

fn monsoon(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_monsoon"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap(), text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic raw files plus an ingested store, 1901..=1930.
struct Fixture {
    tmp: TempDir,
    raw: PathBuf,
    store: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let raw = tmp.path().join("raw");
        let (code, out) = monsoon(&["synth", "--years", "30", "--run-dir", s(&raw)]);
        assert_eq!(code, 0, "{out}");
        let store = tmp.path().join("store");
        let (code, out) = monsoon(&[
            "ingest",
            "--rain",
            s(&raw.join("rain.csv")),
            "--nino",
            s(&raw.join("nino34.txt")),
            "--iod",
            s(&raw.join("dmi.csv")),
            "--run-dir",
            s(&store),
        ]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("target years fully covered"), "{out}");
        Self { tmp, raw, store }
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }

    fn train(&self, name: &str, extra: &[&str]) -> PathBuf {
        let dir = self.dir(name);
        let mut args = vec![
            "train",
            "--store",
            s(&self.store),
            "--epochs",
            "2",
            "--split-boundary",
            "1922",
            "--run-dir",
            s(&dir),
        ];
        args.extend_from_slice(extra);
        let (code, out) = monsoon(&args);
        assert_eq!(code, 0, "{out}");
        dir
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out) = monsoon(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["ingest", "train", "benchmark", "predict", "gridsearch"] {
        assert!(out.contains(cmd), "{out}");
    }
    assert!(out.contains("Exit codes"));
    assert_eq!(monsoon(&["--version"]).0, 0);
    assert_eq!(monsoon(&["train", "--help"]).0, 0);
}

#[test]
fn usage_errors_exit_one() {
    let f = Fixture::new();
    assert_eq!(monsoon(&[]).0, 1);
    assert_eq!(
        monsoon(&[
            "train",
            "--store",
            s(&f.store),
            "--variant",
            "D7",
            "--run-dir",
            s(&f.dir("x"))
        ])
        .0,
        1
    );
    assert_eq!(
        monsoon(&[
            "train",
            "--store",
            s(&f.store),
            "--set",
            "nonsense=1",
            "--run-dir",
            s(&f.dir("y"))
        ])
        .0,
        1
    );
    let cfg = f.dir("bad.cfg");
    fs::write(&cfg, "this is not key value\n").unwrap();
    assert_eq!(
        monsoon(&["train", "--store", s(&f.store), "--config", s(&cfg)]).0,
        1
    );
}

#[test]
fn ingest_rejects_incomplete_year_with_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(&SyntheticConfig {
        years: 3,
        ..Default::default()
    });
    let csv = data.rain.to_csv();
    let truncated: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with("1902-09-30"))
        .collect();
    let rain = tmp.path().join("rain.csv");
    fs::write(&rain, truncated.join("\n")).unwrap();
    let nino = tmp.path().join("nino.csv");
    fs::write(&nino, data.nino.to_csv()).unwrap();
    let dmi = tmp.path().join("dmi.csv");
    fs::write(&dmi, data.dmi.to_csv()).unwrap();
    let (code, out) = monsoon(&[
        "ingest",
        "--rain",
        s(&rain),
        "--nino",
        s(&nino),
        "--iod",
        s(&dmi),
        "--run-dir",
        s(&tmp.path().join("st")),
    ]);
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("1902"), "{out}");
}

#[test]
fn ingest_reads_urls_from_a_warm_cache_offline() {
    let f = Fixture::new();
    let cache = f.dir("cache");
    fs::create_dir_all(&cache).unwrap();
    let url = "http://127.0.0.1:9/nino34.long.anom.data";
    fs::copy(f.raw.join("nino34.txt"), cache_path(&cache, url)).unwrap();
    let (code, out) = monsoon(&[
        "ingest",
        "--rain",
        s(&f.raw.join("rain.csv")),
        "--nino",
        url,
        "--iod",
        s(&f.raw.join("dmi.csv")),
        "--cache",
        s(&cache),
        "--run-dir",
        s(&f.dir("st2")),
    ]);
    assert_eq!(code, 0, "{out}");
    let m = json(&f.dir("st2").join("manifest.json"));
    assert_eq!(m["inputs"][1]["location"], url);
}

#[test]
fn train_writes_sidecar_history_and_one_manifest() {
    let f = Fixture::new();
    let dir = f.train("t", &["--variant", "D4", "--model", "patchtst"]);
    let card = json(&dir.join("model.ckpt.json"));
    assert_eq!(card["variant"], "D4_AISMR_NINO_IOD");
    assert_eq!(card["window"], 30);
    let loss = fs::read_to_string(dir.join("loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,train_loss,val_loss\n"));
    assert_eq!(loss.lines().count(), 3);
    let manifests = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
        .count();
    assert_eq!(manifests, 1);
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["config"]["train"]["max_epochs"], 2);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
    let metrics = json(&dir.join("metrics.json"));
    assert_eq!(metrics["test"]["years"].as_array().unwrap().len(), 8);
}

#[test]
fn default_runs_land_under_runs_root() {
    let f = Fixture::new();
    let root = f.dir("runs");
    let (code, out) = monsoon(&[
        "train",
        "--store",
        s(&f.store),
        "--epochs",
        "1",
        "--split-boundary",
        "1922",
        "--runs-root",
        s(&root),
        "--model",
        "lstm",
    ]);
    assert_eq!(code, 0, "{out}");
    let dirs: Vec<_> = fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].ends_with("-train"), "{dirs:?}");
}

#[test]
fn predict_d1_needs_no_forecast_files() {
    let f = Fixture::new();
    let dir = f.train("d1", &["--variant", "D1"]);
    let out_dir = f.dir("p");
    let (code, out) = monsoon(&[
        "predict",
        "--year",
        "1931",
        "--checkpoint",
        s(&dir.join("model.ckpt")),
        "--store",
        s(&f.store),
        "--run-dir",
        s(&out_dir),
    ]);
    assert_eq!(code, 0, "{out}");
    let r = json(&out_dir.join("report.json"));
    assert_eq!(r["daily_mm"].as_array().unwrap().len(), 122);
    assert!(r["forecast_months"].as_array().unwrap().is_empty());
    let total: f64 = r["daily_mm"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((total - r["total_mm"].as_f64().unwrap()).abs() < 1e-6);
    assert!(
        (r["anomaly_mm"].as_f64().unwrap() - (total - r["lpa_mm"].as_f64().unwrap())).abs() < 1e-6
    );
}

#[test]
fn predict_d4_lists_missing_months_then_uses_forecast_files() {
    let f = Fixture::new();
    let dir = f.train("d4", &["--variant", "D4"]);
    let ckpt = dir.join("model.ckpt");
    let nino = f.dir("nino_fc.csv");
    fs::write(
        &nino,
        "year,month,value\n1931,1,0.3\n1931,2,0.2\n1931,3,0.1\n1931,4,0.0\n",
    )
    .unwrap();
    let dmi_rows: String = (1..=12).map(|m| format!("1931,{m},0.5\n")).collect();
    let dmi = f.dir("dmi_fc.csv");
    fs::write(&dmi, format!("year,month,value\n{dmi_rows}")).unwrap();
    let (code, out) = monsoon(&[
        "predict",
        "--year",
        "1931",
        "--checkpoint",
        s(&ckpt),
        "--store",
        s(&f.store),
        "--nino-forecast",
        s(&nino),
        "--iod-forecast",
        s(&dmi),
        "--run-dir",
        s(&f.dir("p1")),
    ]);
    assert_eq!(code, 4, "{out}");
    assert!(
        out.contains("(1931, 5)") && !out.contains("(1931, 4)"),
        "{out}"
    );

    fs::write(
        &nino,
        "year,month,value\n1931,1,0.3\n1931,2,0.2\n1931,3,0.1\n1931,4,0.0\n1931,5,-0.1\n",
    )
    .unwrap();
    let out_dir = f.dir("p2");
    let (code, out) = monsoon(&[
        "predict",
        "--year",
        "1931",
        "--checkpoint",
        s(&ckpt),
        "--store",
        s(&f.store),
        "--nino-forecast",
        s(&nino),
        "--iod-forecast",
        s(&dmi),
        "--run-dir",
        s(&out_dir),
    ]);
    assert_eq!(code, 0, "{out}");
    let r = json(&out_dir.join("report.json"));
    assert_eq!(r["forecast_months"].as_array().unwrap().len(), 17);
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["annotations"]["forecast_inputs"][0]["source"], "forecast");
    assert!(fs::read_to_string(out_dir.join("report.txt"))
        .unwrap()
        .contains("forecast inputs: nino34 1931-01"));
}

#[test]
fn predict_rejects_a_checkpoint_whose_layout_disagrees_with_its_config() {
    let f = Fixture::new();
    let dir = f.train("t", &["--variant", "D1"]);
    let ckpt = dir.join("model.ckpt");
    let (_, card): (monsoon_core::ParamSet, serde_json::Value) =
        monsoon_core::training::load_checkpoint(&ckpt).unwrap();
    let (params, _): (monsoon_core::ParamSet, serde_json::Value) =
        monsoon_core::training::load_checkpoint(&ckpt).unwrap();
    let mut card = card;
    card["patch"]["d_model"] = 16.into();
    let bad = f.dir("bad.ckpt");
    monsoon_core::training::save_checkpoint(&bad, &params, &card).unwrap();
    let (code, out) = monsoon(&[
        "predict",
        "--year",
        "1931",
        "--checkpoint",
        s(&bad),
        "--store",
        s(&f.store),
        "--run-dir",
        s(&f.dir("p")),
    ]);
    assert_eq!(code, 4, "{out}");
}

#[test]
fn gridsearch_runs_the_product_and_saves_the_best() {
    let f = Fixture::new();
    let grid = f.dir("grid.txt");
    fs::write(&grid, "# axes\nhidden=64,128\nlayers=2,3\n").unwrap();
    let dir = f.dir("gs");
    let (code, out) = monsoon(&[
        "gridsearch",
        "--store",
        s(&f.store),
        "--grid",
        s(&grid),
        "--model",
        "lstm",
        "--epochs",
        "1",
        "--split-boundary",
        "1922",
        "--run-dir",
        s(&dir),
    ]);
    assert_eq!(code, 0, "{out}");
    let trials = fs::read_to_string(dir.join("trials.csv")).unwrap();
    let rows: Vec<&str> = trials.lines().collect();
    assert_eq!(
        rows[0],
        "trial_id,hidden,layers,best_val_loss,epochs,seconds"
    );
    assert_eq!(rows.len(), 5);
    let best: Vec<&str> = rows[1].split(',').collect();
    let card = json(&dir.join("best.ckpt.json"));
    assert_eq!(
        card["lstm"]["hidden_dim"].as_f64().unwrap(),
        best[1].parse::<f64>().unwrap()
    );
    assert_eq!(
        card["lstm"]["n_layers"].as_f64().unwrap(),
        best[2].parse::<f64>().unwrap()
    );
    assert_eq!(
        card["seed"].as_u64().unwrap(),
        best[0].parse::<u64>().unwrap()
    );
    assert_eq!(
        json(&dir.join("manifest.json"))["annotations"]["grid"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn gridsearch_exit_codes() {
    let f = Fixture::new();
    let grid = f.dir("g.txt");
    fs::write(&grid, "hidden=\n").unwrap();
    assert_eq!(
        monsoon(&[
            "gridsearch",
            "--store",
            s(&f.store),
            "--grid",
            s(&grid),
            "--run-dir",
            s(&f.dir("a"))
        ])
        .0,
        1
    );
    fs::write(&grid, "window=20,30\n").unwrap();
    assert_eq!(
        monsoon(&[
            "gridsearch",
            "--store",
            s(&f.store),
            "--grid",
            s(&grid),
            "--run-dir",
            s(&f.dir("b"))
        ])
        .0,
        1
    );
    fs::write(&grid, "learning_rate=1e200,1e300\n").unwrap();
    let (code, out) = monsoon(&[
        "gridsearch",
        "--store",
        s(&f.store),
        "--grid",
        s(&grid),
        "--epochs",
        "2",
        "--split-boundary",
        "1922",
        "--run-dir",
        s(&f.dir("c")),
    ]);
    assert_eq!(code, 5, "{out}");
}

#[test]
fn non_finite_training_exits_three() {
    let f = Fixture::new();
    let (code, out) = monsoon(&[
        "train",
        "--store",
        s(&f.store),
        "--learning-rate",
        "1e300",
        "--epochs",
        "3",
        "--split-boundary",
        "1922",
        "--run-dir",
        s(&f.dir("nf")),
    ]);
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("epoch"), "{out}");
}

#[test]
fn benchmark_subset_writes_table_plot_and_predictions() {
    let f = Fixture::new();
    let dir = f.dir("bm");
    let (code, out) = monsoon(&[
        "benchmark",
        "--store",
        s(&f.store),
        "--only",
        "lr,gbt",
        "--jobs",
        "2",
        "--split-boundary",
        "1922",
        "--rmse-convention",
        "conventional",
        "--run-dir",
        s(&dir),
    ]);
    assert_eq!(code, 0, "{out}");
    let csv = fs::read_to_string(dir.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 40);
    assert!(
        rows.iter().all(|r| !r.ends_with(',') && !r.contains(",,,")),
        "{csv}"
    );
    assert!(dir.join("comparison.svg").exists());
    assert_eq!(
        fs::read_to_string(dir.join("predictions.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 40 * 8
    );
}

#[test]
fn benchmark_results_do_not_depend_on_worker_count() {
    let f = Fixture::new();
    let run = |name: &str, jobs: &str| {
        let dir = f.dir(name);
        let (code, out) = monsoon(&[
            "benchmark",
            "--store",
            s(&f.store),
            "--only",
            "svr,gbt",
            "--jobs",
            jobs,
            "--split-boundary",
            "1922",
            "--run-dir",
            s(&dir),
        ]);
        assert_eq!(code, 0, "{out}");
        (
            fs::read(dir.join("comparison.csv")).unwrap(),
            fs::read(dir.join("predictions.csv")).unwrap(),
        )
    };
    assert_eq!(run("one", "1"), run("three", "3"));
}

#[test]
fn explicit_run_dir_must_be_empty() {
    let f = Fixture::new();
    let (code, out) = monsoon(&["synth", "--years", "3", "--run-dir", s(&f.raw)]);
    assert_eq!(code, 1, "{out}");
}
