//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use monsoon_core::autodiff::write_atomic;
use monsoon_core::evaluation::{
    anomaly_series, build_comparison_table, emit_anomalies, emit_comparison, Climatology,
    MetricReport,
};
use monsoon_core::features::{enumerate_baseline_datasets, DatasetVariant, YearRecord};
use monsoon_core::ingest::{
    fetch_source, parse_daily_rainfall_csv, parse_index_auto, parse_iod_csv, validate_coverage,
    SourceKind, SourceSpec,
};
use monsoon_core::models::Network;
use monsoon_core::synthetic::{generate, SyntheticConfig};
use monsoon_core::training::{
    grid_search, history_csv, load_checkpoint, save_checkpoint, trials_csv, GridSpec, TrainConfig,
};
use rayon::prelude::*;
use serde_json::json;

use crate::baselines::{run_baseline, BaselineKind};
use crate::cli::{
    BenchmarkArgs, Cli, Command, GridArgs, IngestArgs, PredictArgs, SynthArgs, TrainArgs,
};
use crate::manifest::{create_run_dir, RunManifest};
use crate::pipeline::{
    fit, forecast, forecast_record, prepare, score_test_years, AnyNet, ModelCard, ModelKind,
    TestScores,
};
use crate::report::{ForecastMonth, ForecastReport};
use crate::settings::{usage, Settings};
use crate::store::{Store, DMI_FILE, NINO_FILE, RAIN_FILE};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Ingest(a) => ingest(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Benchmark(a) => benchmark(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::Gridsearch(a) => gridsearch(cli, a),
    }
}

fn settings(cli: &Cli, flags: Option<&crate::cli::ModelFlags>) -> Result<Settings> {
    let mut s = Settings::default();
    s.apply(&cli.option_pairs(flags)?)?;
    Ok(s)
}

fn run_dir(cli: &Cli, command: &str) -> Result<PathBuf> {
    let dir = create_run_dir(&cli.runs_root, command, cli.run_dir.as_deref())?;
    log::info!("writing to {}", dir.display());
    Ok(dir)
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    write_atomic(path, body.as_ref()).with_context(|| format!("writing {}", path.display()))
}

fn load_store(path: &Path, manifest: &mut RunManifest) -> Result<Store> {
    let store = Store::load(path).with_context(|| format!("loading store {}", path.display()))?;
    for name in [RAIN_FILE, NINO_FILE, DMI_FILE] {
        manifest.add_file(name, &path.join(name))?;
    }
    Ok(store)
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    if a.years < 2 {
        return Err(usage("--years must be at least 2"));
    }
    let cfg = SyntheticConfig {
        first_year: a.first_year,
        years: a.years,
        seed: a.seed,
        ..Default::default()
    };
    let data = generate(&cfg);
    let dir = run_dir(cli, "synth")?;
    let mut manifest = RunManifest::new(
        "synth",
        json!({ "first_year": a.first_year, "years": a.years }),
        Some(a.seed),
    );
    manifest.write(&dir)?;
    for (name, body) in [
        ("rain.csv", data.rain.to_csv()),
        ("nino34.txt", data.nino.to_noaa_text()),
        ("dmi.csv", data.dmi.to_csv()),
    ] {
        let path = dir.join(name);
        write(&path, &body)?;
        manifest.add_input(name, &path.display().to_string(), body.as_bytes());
    }
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    if !(a.iod_threshold.is_finite() && a.iod_threshold > 0.0) {
        return Err(usage("--iod-threshold must be positive"));
    }
    let fetch = |kind, loc: &str| -> Result<String> {
        let text = fetch_source(&SourceSpec::new(kind, loc, &a.cache)?)
            .with_context(|| format!("reading {loc}"))?;
        Ok(text)
    };
    let rain_text = fetch(SourceKind::RainfallCsv, &a.rain)?;
    let nino_text = fetch(SourceKind::NoaaIndexText, &a.nino)?;
    let iod_text = fetch(SourceKind::IodCsv, &a.iod)?;
    let rain =
        parse_daily_rainfall_csv(&rain_text).with_context(|| format!("parsing {}", a.rain))?;
    let nino =
        parse_index_auto(&nino_text, "nino34").with_context(|| format!("parsing {}", a.nino))?;
    let dmi = parse_iod_csv(&iod_text).with_context(|| format!("parsing {}", a.iod))?;
    let store = Store::new(rain, nino, dmi, a.iod_threshold, -a.iod_threshold)?;

    let dir = run_dir(cli, "ingest")?;
    let mut manifest = RunManifest::new(
        "ingest",
        json!({ "iod_threshold": a.iod_threshold, "cache": a.cache }),
        None,
    );
    manifest.add_input("rain", &a.rain, rain_text.as_bytes());
    manifest.add_input("nino34", &a.nino, nino_text.as_bytes());
    manifest.add_input("iod", &a.iod, iod_text.as_bytes());
    manifest.write(&dir)?;
    let info = store.write(&dir)?;
    let coverage = validate_coverage(&store.rain, &store.nino, &store.iod, store.rain.years());
    let mut text = coverage.render();
    for v in DatasetVariant::ALL {
        let _ = writeln!(
            text,
            "{}: {} usable years",
            v.tag(),
            coverage.complete_years(v.requirements(true)).len()
        );
    }
    write(&dir.join("coverage.txt"), &text)?;
    manifest
        .annotations
        .insert("store".into(), serde_json::to_value(&info)?);
    manifest.write(&dir)?;
    print!("{text}");
    println!("{}", dir.display());
    Ok(())
}

fn card_json(card: &ModelCard) -> Result<String> {
    Ok(serde_json::to_string_pretty(card)?)
}

fn save_model(path: &Path, net: &AnyNet, card: &ModelCard) -> Result<()> {
    save_checkpoint(path, net.params(), card)?;
    write(&sidecar(path), card_json(card)?)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Rebuilds the network stored at `path`.
pub fn load_model(path: &Path) -> Result<(ModelCard, AnyNet)> {
    let (params, card): (_, ModelCard) =
        load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    let mut net = card.build()?;
    if !net.params().same_layout(&params) {
        return Err(monsoon_core::autodiff::CheckpointError::VersionMismatch(
            "checkpoint parameters do not match the architecture in its config".into(),
        ))
        .with_context(|| format!("loading {}", path.display()));
    }
    net.params_mut()
        .assign(&params)
        .map_err(monsoon_core::models::ModelError::from)?;
    Ok((card, net))
}

fn scores_json(scores: &TestScores, report: &MetricReport<f64>) -> serde_json::Value {
    json!({
        "rmse_percent": report.rmse_percent,
        "spearman": report.spearman,
        "n": report.n,
        "error": report.error,
        "years": scores.years,
        "observed": scores.observed,
        "predicted": scores.predicted,
    })
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let s = settings(cli, Some(&a.flags))?;
    let mut manifest = RunManifest::new("train", s.to_json(), Some(s.train.seed));
    let store = load_store(&a.store, &mut manifest)?;
    let dir = run_dir(cli, "train")?;
    manifest.write(&dir)?;
    let fitted = fit(&store, s.variant, &s.net, &s.train, s.split_boundary)?;
    save_model(&dir.join("model.ckpt"), &fitted.net, &fitted.card)?;
    write(&dir.join("loss.csv"), history_csv(&fitted.report.history))?;
    let scores = score_test_years(&fitted)?;
    let report = scores.report(
        &s.net.kind.to_string(),
        s.variant.tag(),
        None,
        s.rmse_convention,
    );
    let metrics = json!({
        "variant": s.variant.tag(),
        "model": s.net.kind.to_string(),
        "best_epoch": fitted.report.best_epoch,
        "best_val_loss": fitted.report.best_val_loss,
        "epochs_run": fitted.report.epochs_run(),
        "stopped_early": fitted.report.stopped_early,
        "climatology": fitted.card.climatology,
        "test": scores_json(&scores, &report),
    });
    write(
        &dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?,
    )?;
    manifest.write(&dir)?;
    match (report.rmse_percent, report.spearman) {
        (Some(r), Some(sp)) => println!(
            "{} {}: test RMSE% {r:.4}, Spearman {sp:.4} over {} years",
            s.net.kind,
            s.variant.tag(),
            report.n
        ),
        _ => println!(
            "{} {}: test metrics unavailable: {}",
            s.net.kind,
            s.variant.tag(),
            report.error.unwrap_or_default()
        ),
    }
    println!("{}", dir.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Job {
    Patch(DatasetVariant),
    Baseline(BaselineKind, usize),
}

struct JobOutcome {
    report: MetricReport<f64>,
    scores: Option<TestScores>,
    climatology: Option<Climatology<f64>>,
}

fn selection(a: &BenchmarkArgs) -> Result<(bool, Vec<BaselineKind>)> {
    let Some(only) = &a.only else {
        return Ok((true, BaselineKind::ALL.to_vec()));
    };
    let mut patch = false;
    let mut kinds = Vec::new();
    for item in only.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("patchtst") {
            patch = true;
        } else {
            kinds.push(item.parse::<BaselineKind>().map_err(usage)?);
        }
    }
    if !patch && kinds.is_empty() {
        return Err(usage("--only selects no models"));
    }
    kinds.sort();
    kinds.dedup();
    Ok((patch, kinds))
}

fn benchmark(cli: &Cli, a: &BenchmarkArgs) -> Result<()> {
    let s = settings(cli, Some(&a.flags))?;
    if s.net.kind != ModelKind::Patchtst {
        return Err(usage(
            "benchmark trains the patched transformer; use --only to pick baselines",
        ));
    }
    let (with_patch, kinds) = selection(a)?;
    if a.jobs == Some(0) {
        return Err(usage("--jobs must be positive"));
    }
    let mut manifest = RunManifest::new("benchmark", s.to_json(), Some(s.train.seed));
    let store = load_store(&a.store, &mut manifest)?;
    let dir = run_dir(cli, "benchmark")?;
    manifest.write(&dir)?;

    let years = validate_coverage(&store.rain, &store.nino, &store.iod, store.rain.years())
        .complete_years(DatasetVariant::D4.requirements(true));
    let tables = if kinds.is_empty() {
        vec![]
    } else {
        enumerate_baseline_datasets(
            &store.rain,
            &store.nino,
            &store.iod,
            &years,
            s.split_boundary,
        )?
    };
    let mut jobs: Vec<Job> = Vec::new();
    if with_patch {
        jobs.extend(DatasetVariant::ALL.map(Job::Patch));
    }
    for &k in &kinds {
        jobs.extend((0..tables.len()).map(|i| Job::Baseline(k, i)));
    }
    log::info!("{} jobs over {} baseline years", jobs.len(), years.len());

    let run = |job: &Job| -> JobOutcome {
        let (model, variant, lookback) = match *job {
            Job::Patch(v) => ("PatchTST".to_string(), v.tag().to_string(), None),
            Job::Baseline(k, i) => (
                k.name().to_string(),
                tables[i].variant.tag().to_string(),
                Some(tables[i].lookback),
            ),
        };
        let result = match *job {
            Job::Patch(v) => fit(&store, v, &s.net, &s.train, s.split_boundary)
                .and_then(|f| Ok((score_test_years(&f)?, Some(f.card.climatology)))),
            Job::Baseline(k, i) => run_baseline(k, &tables[i], &s).map(|sc| (sc, None)),
        };
        match result {
            Ok((scores, climatology)) => {
                let report = scores.report(&model, &variant, lookback, s.rmse_convention);
                log::info!(
                    "{model} {variant} {lookback:?}: rmse% {:?}",
                    report.rmse_percent
                );
                JobOutcome {
                    report,
                    scores: Some(scores),
                    climatology,
                }
            }
            Err(e) => {
                log::warn!("{model} {variant} {lookback:?} failed: {e:#}");
                JobOutcome {
                    report: MetricReport::failure(&model, &variant, lookback, format!("{e:#}")),
                    scores: None,
                    climatology: None,
                }
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()?;
    let outcomes: Vec<JobOutcome> = pool.install(|| jobs.par_iter().map(run).collect());

    let reports: Vec<MetricReport<f64>> = outcomes.iter().map(|o| o.report.clone()).collect();
    let rows = build_comparison_table(&reports);
    emit_comparison(&rows, &dir.join("comparison"))?;
    let mut preds = String::from("model,variant,lookback,year,observed,predicted\n");
    for o in &outcomes {
        let Some(sc) = &o.scores else { continue };
        let lb = o.report.lookback.map(|l| l.to_string()).unwrap_or_default();
        for ((y, ob), p) in sc.years.iter().zip(&sc.observed).zip(&sc.predicted) {
            let _ = writeln!(
                preds,
                "{},{},{lb},{y},{ob:.4},{p:.4}",
                o.report.model, o.report.variant
            );
        }
        if let (Some(clim), None) = (o.climatology, o.report.lookback) {
            let series = anomaly_series(&sc.years, &sc.observed, &sc.predicted, clim.lpa)?;
            emit_anomalies(
                &series,
                &dir.join(format!("anomalies_{}", &o.report.variant[..2])),
            )?;
        }
    }
    write(&dir.join("predictions.csv"), preds)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    manifest
        .annotations
        .insert("failed_rows".into(), json!(failed));
    manifest.write(&dir)?;
    for r in &rows {
        match (r.rmse_percent, r.spearman) {
            (Some(x), Some(sp)) => println!(
                "{:<8} {:<18} {:>2}  rmse% {x:.4}  spearman {sp:.4}",
                r.model,
                r.variant,
                r.lookback.map(|l| l.to_string()).unwrap_or("-".into())
            ),
            _ => println!(
                "{:<8} {:<18} {:>2}  failed: {}",
                r.model,
                r.variant,
                r.lookback.map(|l| l.to_string()).unwrap_or("-".into()),
                r.error.as_deref().unwrap_or("")
            ),
        }
    }
    println!("{}", dir.display());
    if !rows.is_empty() && failed == rows.len() {
        return Err(
            anyhow::Error::from(monsoon_core::training::TrainError::EmptyData)
                .context("every benchmark job failed"),
        );
    }
    Ok(())
}

fn forecast_months(
    target: &mut monsoon_core::ingest::MonthlyIndexSeries,
    path: &Path,
    name: &str,
    manifest: &mut RunManifest,
) -> Result<Vec<ForecastMonth>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.add_input(name, &path.display().to_string(), text.as_bytes());
    let entry =
        json!({ "name": name, "location": path.display().to_string(), "source": "forecast" });
    match manifest
        .annotations
        .entry("forecast_inputs")
        .or_insert_with(|| json!([]))
    {
        serde_json::Value::Array(list) => list.push(entry),
        other => *other = json!([entry]),
    }
    let series =
        parse_index_auto(&text, name).with_context(|| format!("parsing {}", path.display()))?;
    let filled = target.fill_from(&series);
    Ok(filled
        .into_iter()
        .map(|(year, month)| ForecastMonth {
            index: name.into(),
            year,
            month,
        })
        .collect())
}

fn predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let mut manifest = RunManifest::new(
        "predict",
        json!({ "year": a.year, "checkpoint": a.checkpoint }),
        None,
    );
    let (card, net) = load_model(&a.checkpoint)?;
    manifest.add_file("checkpoint", &a.checkpoint)?;
    manifest.seed = Some(card.seed);
    let Some(store_dir) = &a.store else {
        return Err(usage(
            "--store is needed for the previous season's rainfall",
        ));
    };
    let base = load_store(store_dir, &mut manifest)?;
    let (mut nino, mut dmi) = (base.nino.clone(), base.dmi.clone());
    let mut flagged = Vec::new();
    if let Some(p) = &a.nino_forecast {
        flagged.extend(forecast_months(&mut nino, p, "nino34", &mut manifest)?);
    }
    if let Some(p) = &a.iod_forecast {
        flagged.extend(forecast_months(&mut dmi, p, "dmi", &mut manifest)?);
    }
    let (pos, neg) = base.iod_thresholds;
    let store = Store::new(base.rain.clone(), nino, dmi, pos, neg)?;
    let record: YearRecord = forecast_record(&store, &card, a.year)?;
    let relevant = |m: &ForecastMonth| {
        let keys = if m.index == "nino34" {
            card.variant
                .uses_nino()
                .then(|| monsoon_core::ingest::nino_window_keys(a.year))
        } else {
            card.variant
                .uses_iod()
                .then(|| monsoon_core::ingest::iod_window_keys(a.year))
        };
        keys.is_some_and(|k| k.contains(&(m.year, m.month)))
    };
    flagged.retain(relevant);
    let (daily, total) = forecast(&card, &net, &[&record])?
        .pop()
        .context("empty forecast")?;
    let mut clim = card.climatology;
    if let Some(v) = a.lpa {
        clim.lpa = v;
    }
    if let Some(v) = a.t1 {
        clim.t1 = v;
    }
    if let Some(v) = a.t2 {
        clim.t2 = v;
    }
    if !(clim.lpa > 0.0 && clim.t1 <= clim.t2) {
        return Err(usage("need a positive LPA and t1 <= t2"));
    }
    let report = ForecastReport::new(
        a.year,
        card.variant.tag(),
        &card.kind.to_string(),
        total,
        daily,
        clim,
        flagged,
    );
    let dir = run_dir(cli, "predict")?;
    manifest.write(&dir)?;
    write(&dir.join("report.txt"), report.text())?;
    write(
        &dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    write(&dir.join("daily.csv"), report.daily_csv())?;
    manifest.write(&dir)?;
    print!("{}", report.text());
    println!("{}", dir.display());
    Ok(())
}

const FIXED_AXES: [&str; 5] = ["window", "horizon", "mode", "model", "encoder"];

fn gridsearch(cli: &Cli, a: &GridArgs) -> Result<()> {
    let s = settings(cli, Some(&a.flags))?;
    let text = fs::read_to_string(&a.grid)
        .map_err(|e| usage(format!("cannot read grid {}: {e}", a.grid.display())))?;
    let spec = GridSpec::parse(&text)?;
    for (name, values) in &spec.axes {
        if FIXED_AXES.contains(&name.as_str()) {
            return Err(usage(format!(
                "grid axis {name:?} changes the training rows; set it outside the grid"
            )));
        }
        let v = values[0].to_string();
        let known = TrainConfig::default()
            .set(name, &v)
            .map_err(|e| usage(e.to_string()))?
            || s.net
                .clone()
                .set(name, &v)
                .map_err(|e| usage(e.to_string()))?;
        if !known {
            return Err(usage(format!("unknown grid axis {name:?}")));
        }
    }
    let mut manifest = RunManifest::new("gridsearch", s.to_json(), Some(s.train.seed));
    manifest.add_input("grid", &a.grid.display().to_string(), text.as_bytes());
    let store = load_store(&a.store, &mut manifest)?;
    manifest.annotations.insert("grid".into(), json!(spec.axes));
    let dir = run_dir(cli, "gridsearch")?;
    manifest.write(&dir)?;
    let prep = prepare(&store, s.variant, &s.net, &s.train, s.split_boundary)?;
    let channels = prep.dataset.channels.len();
    let spec_for = |point: &monsoon_core::training::GridPoint| -> Result<crate::pipeline::NetSpec, monsoon_core::models::ModelError> {
        let mut net = s.net.clone();
        for (k, v) in &point.values {
            if !TrainConfig::default().set(k, &v.to_string()).unwrap_or(false) {
                net.set(k, &v.to_string()).map_err(|e| monsoon_core::models::ModelError::InvalidConfig(e.to_string()))?;
            }
        }
        Ok(net)
    };
    let results = grid_search(
        &spec,
        &s.train,
        &prep.train_rows,
        &prep.val_rows,
        |point, seed| spec_for(point)?.build(channels, seed),
    )?;
    write(&dir.join("trials.csv"), trials_csv(&spec, &results))?;
    let best = &results[0];
    let net_spec = spec_for(&best.point)?;
    let card = prep.card(&net_spec, &best.config);
    let mut net = card.build()?;
    net.params_mut()
        .assign(&best.params)
        .map_err(monsoon_core::models::ModelError::from)?;
    save_model(&dir.join("best.ckpt"), &net, &card)?;
    manifest.annotations.insert("best_trial".into(), json!({ "trial_id": best.trial_id, "point": best.point.values, "best_val_loss": best.best_val_loss }));
    manifest.annotations.insert(
        "trials".into(),
        json!({ "succeeded": results.len(), "total": spec.len() }),
    );
    manifest.write(&dir)?;
    println!(
        "{} of {} trials succeeded; best trial {} with validation loss {:.6}",
        results.len(),
        spec.len(),
        best.trial_id,
        best.best_val_loss
    );
    println!("{}", dir.display());
    Ok(())
}
