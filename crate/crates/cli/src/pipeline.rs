//! Training and forecasting flows shared by the subcommands.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use monsoon_core::autodiff::{ParamSet, Tape, Var};
use monsoon_core::evaluation::{
    long_period_average, rmse_percent_with, spearman, Climatology, MetricReport, RmseConvention,
};
use monsoon_core::features::{
    apply_scaler, broadcast_monthly_to_daily, build_season_dataset, fit_scaler,
    make_windows_for_years, Channel, DatasetVariant, ScalerParams, SeasonDataset, Split,
    YearRecord,
};
use monsoon_core::ingest::{iod_window_keys, nino_window_keys, JJAS_DAYS};
use monsoon_core::models::{
    direct_inputs, direct_total_from_output, rollout_season, CnnBaseline, CnnConfig, LstmBaseline,
    LstmConfig, Mode, ModelError, Network, PatchConfig, PatchTst, Samples,
};
use monsoon_core::training::{split_validation, train, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};

use crate::store::Store;

pub const DEFAULT_SPLIT_BOUNDARY: i32 = 2010;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Patchtst,
    Lstm,
    Cnn,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "patchtst" => Ok(Self::Patchtst),
            "lstm" => Ok(Self::Lstm),
            "cnn" => Ok(Self::Cnn),
            _ => Err(format!(
                "unknown model {s:?} (expected patchtst, lstm or cnn)"
            )),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Patchtst => "patchtst",
            Self::Lstm => "lstm",
            Self::Cnn => "cnn",
        })
    }
}

/// How a seasonal total is produced from the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Day-by-day autoregressive forecast of the whole season.
    Rollout,
    /// One output per season: its mean daily rain.
    Direct,
}

impl FromStr for ForecastMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rollout" => Ok(Self::Rollout),
            "direct" => Ok(Self::Direct),
            _ => Err(format!("unknown mode {s:?} (expected rollout or direct)")),
        }
    }
}

/// Everything needed to rebuild and use a trained network; stored as the
/// checkpoint config and as its JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub kind: ModelKind,
    pub variant: DatasetVariant,
    pub mode: ForecastMode,
    pub window: usize,
    pub horizon: usize,
    pub patch: Option<PatchConfig>,
    pub lstm: Option<LstmConfig>,
    pub cnn: Option<CnnConfig>,
    pub scaler: ScalerParams,
    pub split_boundary: i32,
    pub climatology: Climatology<f64>,
    pub train: TrainConfig,
    pub seed: u64,
}

/// One of the daily sequence networks.
#[derive(Clone, Debug)]
pub enum AnyNet {
    Patch(PatchTst<f64>),
    Lstm(LstmBaseline<f64>),
    Cnn(CnnBaseline<f64>),
}

macro_rules! each {
    ($s:expr, $n:ident => $e:expr) => {
        match $s {
            AnyNet::Patch($n) => $e,
            AnyNet::Lstm($n) => $e,
            AnyNet::Cnn($n) => $e,
        }
    };
}

impl Network<f64> for AnyNet {
    fn params(&self) -> &ParamSet<f64> {
        each!(self, n => n.params())
    }
    fn params_mut(&mut self) -> &mut ParamSet<f64> {
        each!(self, n => n.params_mut())
    }
    fn steps(&self) -> usize {
        each!(self, n => n.steps())
    }
    fn channels(&self) -> usize {
        each!(self, n => n.channels())
    }
    fn horizon(&self) -> usize {
        each!(self, n => n.horizon())
    }
    fn forward(
        &self,
        tape: &Tape<f64>,
        params: &[Var],
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        each!(self, n => n.forward(tape, params, x, mode))
    }
}

/// Network architecture choices, independent of the data.
#[derive(Clone, Debug, PartialEq)]
pub struct NetSpec {
    pub kind: ModelKind,
    pub mode: ForecastMode,
    pub patch: PatchConfig,
    pub lstm: LstmConfig,
    pub cnn: CnnConfig,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Patchtst,
            mode: ForecastMode::Rollout,
            patch: PatchConfig::default(),
            lstm: LstmConfig::default(),
            cnn: CnnConfig::default(),
        }
    }
}

impl NetSpec {
    pub fn window(&self) -> usize {
        self.patch.window
    }

    pub fn horizon(&self) -> usize {
        match self.mode {
            ForecastMode::Rollout => self.patch.horizon,
            ForecastMode::Direct => 1,
        }
    }

    /// Applies one `key=value` architecture option; false if the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{key}: cannot parse {value:?}"))
        };
        let p = &mut self.patch;
        match key {
            "model" => self.kind = value.parse().map_err(anyhow::Error::msg)?,
            "mode" => self.mode = value.parse().map_err(anyhow::Error::msg)?,
            "encoder" => p.encoder = value.parse().map_err(anyhow::Error::msg)?,
            "window" => p.window = num()? as usize,
            "horizon" => p.horizon = num()? as usize,
            "patch_len" => p.patch_len = num()? as usize,
            "stride" => p.stride = num()? as usize,
            "pad_end" => {
                p.pad_end = value
                    .trim()
                    .parse()
                    .with_context(|| format!("{key}: expected true or false"))?
            }
            "d_model" => p.d_model = num()? as usize,
            "n_heads" => p.n_heads = num()? as usize,
            "n_layers" | "layers" => {
                p.n_layers = num()? as usize;
                self.lstm.n_layers = p.n_layers;
                self.cnn.n_layers = p.n_layers;
            }
            "d_ff" => p.d_ff = num()? as usize,
            "dropout" => {
                p.dropout = num()?;
                self.lstm.dropout = p.dropout;
                self.cnn.dropout = p.dropout;
            }
            "hidden_dim" | "hidden" => {
                p.hidden_dim = num()? as usize;
                self.lstm.hidden_dim = p.hidden_dim;
            }
            "filters" => self.cnn.filters = num()? as usize,
            "kernel" => self.cnn.kernel = num()? as usize,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn build(&self, channels: usize, seed: u64) -> Result<AnyNet, ModelError> {
        let cfg = PatchConfig {
            horizon: self.horizon(),
            ..self.patch.clone()
        };
        Ok(match self.kind {
            ModelKind::Patchtst => AnyNet::Patch(PatchTst::new(cfg, channels, seed)?),
            ModelKind::Lstm => AnyNet::Lstm(LstmBaseline::new(
                self.lstm.clone(),
                cfg.window,
                channels,
                cfg.horizon,
                seed,
            )?),
            ModelKind::Cnn => AnyNet::Cnn(CnnBaseline::new(
                self.cnn.clone(),
                cfg.window,
                channels,
                cfg.horizon,
                seed,
            )?),
        })
    }

    fn from_card(card: &ModelCard) -> Self {
        Self {
            kind: card.kind,
            mode: card.mode,
            patch: card.patch.clone().unwrap_or_else(|| PatchConfig {
                window: card.window,
                horizon: card.horizon,
                ..Default::default()
            }),
            lstm: card.lstm.clone().unwrap_or_default(),
            cnn: card.cnn.clone().unwrap_or_default(),
        }
    }
}

impl ModelCard {
    /// A network with this card's architecture and freshly initialized weights.
    pub fn build(&self) -> Result<AnyNet, ModelError> {
        NetSpec::from_card(self).build(self.variant.channels().len(), self.seed)
    }
}

/// Season dataset in raw units over every year with complete inputs,
/// including the previous season.
pub fn season_dataset(
    store: &Store,
    variant: DatasetVariant,
    split_boundary: i32,
) -> Result<SeasonDataset> {
    let years: Vec<i32> = store.rain.years().collect();
    let coverage = monsoon_core::ingest::validate_coverage(
        &store.rain,
        &store.nino,
        &store.iod,
        years.iter().copied(),
    );
    let usable = coverage.complete_years(variant.requirements(true));
    if usable.is_empty() {
        bail!("no year has complete inputs for {variant}");
    }
    Ok(build_season_dataset(
        variant,
        &store.rain,
        &store.nino,
        &store.iod,
        &usable,
        split_boundary,
    )?)
}

/// Mean and terciles of observed totals over the training years.
pub fn training_climatology(ds: &SeasonDataset) -> Result<Climatology<f64>> {
    let train: Vec<&YearRecord> = ds
        .records
        .iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    let (Some(first), Some(last)) = (train.first(), train.last()) else {
        bail!("no training years")
    };
    let totals = train.iter().map(|r| (r.year, r.seasonal_total)).collect();
    Ok(long_period_average(&totals, first.year..=last.year)?)
}

fn direct_samples(
    ds: &SeasonDataset,
    scaler: &ScalerParams,
    years: &[i32],
    w: usize,
) -> Result<Samples<f64>> {
    let records: Vec<&YearRecord> = years.iter().filter_map(|&y| ds.record(y)).collect();
    let rain = scaler.get(Channel::Rain)?;
    Ok(Samples {
        steps: w,
        channels: ds.channels.len(),
        horizon: 1,
        inputs: direct_inputs(&records, w)?,
        targets: records
            .iter()
            .map(|r| (r.seasonal_total / JJAS_DAYS as f64 - rain.mean) / rain.std)
            .collect(),
        tags: records.iter().map(|r| (r.year, 0)).collect(),
    })
}

pub struct Fitted {
    pub card: ModelCard,
    pub net: AnyNet,
    pub report: TrainReport,
    /// Scaled dataset the model was trained on.
    pub dataset: SeasonDataset,
}

/// Scaled data and supervised rows for one variant, ready for training.
pub struct Prepared {
    pub variant: DatasetVariant,
    pub split_boundary: i32,
    pub climatology: Climatology<f64>,
    pub scaler: ScalerParams,
    pub dataset: SeasonDataset,
    pub train_rows: Samples<f64>,
    pub val_rows: Samples<f64>,
}

/// Fits the scaler on the training years and builds training rows; the
/// last `validation_fraction` of those years become validation rows.
pub fn prepare(
    store: &Store,
    variant: DatasetVariant,
    spec: &NetSpec,
    train_cfg: &TrainConfig,
    split_boundary: i32,
) -> Result<Prepared> {
    let raw = season_dataset(store, variant, split_boundary)?;
    let climatology = training_climatology(&raw)?;
    let scaler = fit_scaler(&raw)?;
    let ds = apply_scaler(&scaler, &raw)?;
    let train_years = ds.years_in(Split::Train);
    let (w, h) = (spec.window(), spec.horizon());
    let samples = match spec.mode {
        ForecastMode::Rollout => {
            Samples::from_windows(&make_windows_for_years(&ds, w, h, &train_years)?)
        }
        ForecastMode::Direct => direct_samples(&ds, &scaler, &train_years, w)?,
    };
    let (train_rows, val_rows) = split_validation(&samples, train_cfg.validation_fraction);
    log::info!(
        "{variant}: {} training rows, {} validation rows",
        train_rows.len(),
        val_rows.len()
    );
    Ok(Prepared {
        variant,
        split_boundary,
        climatology,
        scaler,
        dataset: ds,
        train_rows,
        val_rows,
    })
}

impl Prepared {
    pub fn card(&self, spec: &NetSpec, train_cfg: &TrainConfig) -> ModelCard {
        let h = spec.horizon();
        ModelCard {
            kind: spec.kind,
            variant: self.variant,
            mode: spec.mode,
            window: spec.window(),
            horizon: h,
            patch: (spec.kind == ModelKind::Patchtst).then(|| PatchConfig {
                horizon: h,
                ..spec.patch.clone()
            }),
            lstm: (spec.kind == ModelKind::Lstm).then(|| spec.lstm.clone()),
            cnn: (spec.kind == ModelKind::Cnn).then(|| spec.cnn.clone()),
            scaler: self.scaler.clone(),
            split_boundary: self.split_boundary,
            climatology: self.climatology,
            train: train_cfg.clone(),
            seed: train_cfg.seed,
        }
    }
}

pub fn fit(
    store: &Store,
    variant: DatasetVariant,
    spec: &NetSpec,
    train_cfg: &TrainConfig,
    split_boundary: i32,
) -> Result<Fitted> {
    let prep = prepare(store, variant, spec, train_cfg, split_boundary)?;
    let mut net = spec.build(prep.dataset.channels.len(), train_cfg.seed)?;
    let report = train(&mut net, &prep.train_rows, &prep.val_rows, train_cfg)?;
    Ok(Fitted {
        card: prep.card(spec, train_cfg),
        net,
        report,
        dataset: prep.dataset,
    })
}

/// Seasonal totals (mm) for scaled `records`, with daily values in rollout mode.
pub fn forecast(
    card: &ModelCard,
    net: &AnyNet,
    records: &[&YearRecord],
) -> Result<Vec<(Vec<f64>, f64)>> {
    match card.mode {
        ForecastMode::Rollout => Ok(rollout_season(net, &card.scaler, records)?
            .into_iter()
            .map(|f| (f.daily, f.total))
            .collect()),
        ForecastMode::Direct => {
            let out = net.predict(&direct_inputs(records, card.window)?, records.len())?;
            out.iter()
                .map(|&z| {
                    let total = direct_total_from_output(&card.scaler, z)?;
                    Ok((vec![total / JJAS_DAYS as f64; JJAS_DAYS], total))
                })
                .collect()
        }
    }
}

/// Per-year observed and predicted totals on the test block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestScores {
    pub years: Vec<i32>,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl TestScores {
    pub fn report(
        &self,
        model: &str,
        variant: &str,
        lookback: Option<u8>,
        convention: RmseConvention,
    ) -> MetricReport<f64> {
        let metrics = rmse_percent_with(&self.observed, &self.predicted, convention)
            .and_then(|r| Ok((r, spearman(&self.observed, &self.predicted)?)));
        match metrics {
            Ok((r, s)) => MetricReport::success(model, variant, lookback, r, s, self.years.len()),
            Err(e) => MetricReport::failure(model, variant, lookback, e.to_string()),
        }
    }
}

pub fn score_test_years(fitted: &Fitted) -> Result<TestScores> {
    let records: Vec<&YearRecord> = fitted
        .dataset
        .records
        .iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    if records.is_empty() {
        bail!("no test years after {}", fitted.card.split_boundary);
    }
    let preds = forecast(&fitted.card, &fitted.net, &records)?;
    Ok(TestScores {
        years: records.iter().map(|r| r.year).collect(),
        observed: records.iter().map(|r| r.seasonal_total).collect(),
        predicted: preds.into_iter().map(|p| p.1).collect(),
    })
}

/// Builds a scaled record for a season that has not happened yet: rain is
/// unknown (zeros) and exogenous windows come from `store`. On failure
/// returns every missing `(year, month)` key.
pub fn forecast_record(
    store: &Store,
    card: &ModelCard,
    year: i32,
) -> Result<YearRecord, ForecastInputError> {
    let variant = card.variant;
    let prior = store
        .rain
        .season(year - 1)
        .ok_or(ForecastInputError::MissingSeed(year - 1))?;
    let mut missing = Vec::new();
    let mut window =
        |keys: Vec<(i32, u8)>, get: &dyn Fn(i32, u8) -> Option<f64>| -> Vec<Option<f64>> {
            keys.into_iter()
                .map(|(y, m)| {
                    let v = get(y, m);
                    if v.is_none() {
                        missing.push((y, m));
                    }
                    v
                })
                .collect()
        };
    let nino = variant
        .uses_nino()
        .then(|| window(nino_window_keys(year), &|y, m| store.nino.value(y, m)));
    let iod = variant.uses_iod().then(|| {
        window(iod_window_keys(year), &|y, m| {
            store.iod.get(y, m).map(|c| c.as_f64())
        })
    });
    if !missing.is_empty() {
        return Err(ForecastInputError::MissingExogenous(missing));
    }
    let scale = |ch: Channel, v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .map(|x| card.scaler.scale(ch, x).expect("scaler covers the variant"))
            .collect()
    };
    let mut daily = vec![vec![0.0; JJAS_DAYS]];
    let mut record = YearRecord {
        year,
        split: Split::Test,
        daily: vec![],
        nino_window: None,
        iod_window: None,
        prior_season: Some(scale(Channel::Rain, prior.to_vec())),
        seasonal_total: f64::NAN,
    };
    for (ch, w) in [(Channel::Nino34, nino), (Channel::Iod, iod)] {
        if let Some(w) = w {
            let values: Vec<f64> = w.iter().map(|v| v.expect("checked above")).collect();
            daily.push(scale(
                ch,
                broadcast_monthly_to_daily(&w).expect("complete window"),
            ));
            match ch {
                Channel::Nino34 => record.nino_window = Some(values),
                _ => record.iod_window = Some(values),
            }
        }
    }
    record.daily = daily;
    Ok(record)
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ForecastInputError {
    #[error("rainfall for the {0} season is needed to seed the forecast")]
    MissingSeed(i32),
    #[error("missing exogenous months: {}", fmt_keys(.0))]
    MissingExogenous(Vec<(i32, u8)>),
}

fn fmt_keys(keys: &[(i32, u8)]) -> String {
    keys.iter()
        .map(|(y, m)| format!("({y}, {m})"))
        .collect::<Vec<_>>()
        .join(", ")
}
