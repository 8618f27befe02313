//! Mini-batch training, early stopping, grid search and checkpoints.

mod grid;

use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    clip_gradients, load_params, save_params, AdamState, AutodiffError, CheckpointError, ParamSet,
    RngState, Tape,
};
use crate::models::{Mode, ModelError, Network, Samples};
use crate::scalar::Scalar;

pub use grid::{grid_search, trials_csv, GridPoint, GridSpec, TrialResult};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training samples")]
    EmptyData,
    /// `batch` is 1-based; 0 means the end-of-epoch evaluation.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("all {0} grid trials failed")]
    AllTrialsFailed(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint config: {0}")]
    Config(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Global gradient norm bound; `inf` disables clipping.
    pub clip_norm: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    /// Share of the latest training years held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 500,
            clip_norm: 1.0,
            patience: 20,
            min_delta: 1e-5,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, TrainError> {
    value
        .trim()
        .parse()
        .map_err(|_| TrainError::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.min_delta >= 0.0) {
            return bad("min_delta must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Sets one field from a `key=value` pair; returns false for keys that
    /// are not training options.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, TrainError> {
        match key {
            "batch_size" => self.batch_size = parse::<f64>(key, value)? as usize,
            "learning_rate" | "lr" => self.learning_rate = parse(key, value)?,
            "max_epochs" | "epochs" => self.max_epochs = parse::<f64>(key, value)? as usize,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "patience" => self.patience = parse::<f64>(key, value)? as usize,
            "min_delta" => self.min_delta = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
    }
    s
}

/// `(stop, best_epoch)` with a 1-based best epoch. An epoch improves when it
/// beats the minimum of all earlier epochs by more than `min_delta`; training
/// stops once each of the last `patience` epochs failed to improve.
pub fn early_stop_check(history: &[f64], patience: usize, min_delta: f64) -> (bool, usize) {
    assert!(
        !history.is_empty(),
        "early stopping needs at least one epoch"
    );
    let mut best = 0;
    for (i, v) in history.iter().enumerate() {
        if *v < history[best] {
            best = i;
        }
    }
    let n = history.len();
    let stop = patience > 0
        && n > patience
        && (n - patience..n).all(|i| {
            let prior = history[..i].iter().copied().fold(f64::INFINITY, f64::min);
            !(history[i] < prior - min_delta)
        });
    (stop, best + 1)
}

/// Splits by year: the latest `fraction` of distinct years (at least one,
/// when there are two or more) become the validation set.
pub fn split_validation<T: Scalar>(
    samples: &Samples<T>,
    fraction: f64,
) -> (Samples<T>, Samples<T>) {
    let mut years: Vec<i32> = samples.tags.iter().map(|t| t.0).collect();
    years.sort_unstable();
    years.dedup();
    let held = if years.len() < 2 {
        0
    } else {
        ((years.len() as f64 * fraction).ceil() as usize).clamp(1, years.len() - 1)
    };
    let cut = years.len() - held;
    let first_val = years.get(cut).copied().unwrap_or(i32::MAX);
    (
        samples.filter_years(|y| y < first_val),
        samples.filter_years(|y| y >= first_val),
    )
}

/// Mean squared error of `net` on `samples` in evaluation mode.
pub fn evaluate_loss<T: Scalar, N: Network<T>>(
    net: &N,
    samples: &Samples<T>,
) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let out = net.predict(&samples.inputs, samples.len())?;
    let sse: f64 = out
        .iter()
        .zip(&samples.targets)
        .map(|(p, t)| (p.as_f64() - t.as_f64()).powi(2))
        .sum();
    Ok(sse / out.len() as f64)
}

fn check_samples<T: Scalar, N: Network<T>>(net: &N, s: &Samples<T>) -> Result<(), TrainError> {
    if s.steps != net.steps() || s.channels != net.channels() || s.horizon != net.horizon() {
        return Err(ModelError::ShapeMismatch(format!(
            "samples are {}x{} -> {}, model expects {}x{} -> {}",
            s.steps,
            s.channels,
            s.horizon,
            net.steps(),
            net.channels(),
            net.horizon()
        ))
        .into());
    }
    Ok(())
}

/// Trains with Adam on MSE, evaluating `val` after every epoch (or the
/// training set when `val` is empty) and restoring the best parameters.
/// Non-finite tape values become `NonFiniteLoss` at the given position.
fn located(e: ModelError, epoch: usize, batch: usize) -> TrainError {
    match e {
        ModelError::Autodiff(
            AutodiffError::NonFiniteValue { .. } | AutodiffError::NonFiniteGradient { .. },
        ) => TrainError::NonFiniteLoss { epoch, batch },
        other => other.into(),
    }
}

pub fn train<T: Scalar, N: Network<T>>(
    net: &mut N,
    train_set: &Samples<T>,
    val_set: &Samples<T>,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyData);
    }
    check_samples(net, train_set)?;
    if !val_set.is_empty() {
        check_samples(net, val_set)?;
    }
    let monitor = if val_set.is_empty() {
        train_set
    } else {
        val_set
    };
    let mut rng = RngState::seeded(config.seed);
    let mut adam = AdamState::new(net.params(), T::of(config.learning_rate));
    let clip = T::of(config.clip_norm);
    let mut best_params: Option<ParamSet<T>> = None;
    let mut report = TrainReport {
        history: vec![],
        best_epoch: None,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut vals = Vec::new();
    for epoch in 1..=config.max_epochs {
        let order = rng.permutation(train_set.len());
        let (mut sum, mut count) = (0.0, 0usize);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.gather(idx);
            let tape = Tape::new();
            let p = tape.bind(net.params());
            let (x, y) = (tape.constant(x), tape.constant(y));
            let at = |e: ModelError| located(e, epoch, batch + 1);
            let pred = net
                .forward(&tape, &p, x, &mut Mode::Train(&mut rng))
                .map_err(at)?;
            let loss = tape.mse_loss(pred, y).map_err(|e| at(e.into()))?;
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch + 1,
                });
            }
            let mut grads = tape.backward(loss).map_err(|e| at(e.into()))?.collect(&p);
            clip_gradients(&mut grads, clip);
            adam.step(net.params_mut(), &grads)
                .map_err(ModelError::from)?;
            sum += value * idx.len() as f64;
            count += idx.len();
        }
        let val_loss = evaluate_loss(net, monitor).map_err(|e| located(e, epoch, 0))?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, batch: 0 });
        }
        report.history.push(EpochRecord {
            epoch,
            train_loss: sum / count as f64,
            val_loss,
        });
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = Some(epoch);
            best_params = Some(net.params().clone());
        }
        vals.push(val_loss);
        if early_stop_check(&vals, config.patience, config.min_delta).0 {
            report.stopped_early = true;
            break;
        }
    }
    if let Some(best) = best_params {
        net.params_mut().assign(&best).map_err(ModelError::from)?;
    }
    log::debug!(
        "trained {} epochs, best {:?} at {:.6}",
        report.history.len(),
        report.best_epoch,
        report.best_val_loss
    );
    Ok(report)
}

pub fn save_checkpoint<T: Scalar, C: Serialize>(
    path: &Path,
    params: &ParamSet<T>,
    config: &C,
) -> Result<(), TrainError> {
    save_params(path, params, &serde_json::to_value(config)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar, C: DeserializeOwned>(
    path: &Path,
) -> Result<(ParamSet<T>, C), TrainError> {
    let (params, config) = load_params(path)?;
    Ok((params, serde_json::from_value(config)?))
}

/// Loads parameters into a model built from the stored config; the layouts must agree.
pub fn load_checkpoint_into<T: Scalar>(
    path: &Path,
    target: &mut ParamSet<T>,
) -> Result<(), TrainError> {
    let (params, _) = load_params::<T>(path)?;
    if !target.same_layout(&params) {
        return Err(CheckpointError::VersionMismatch(
            "checkpoint parameter layout differs from the model".into(),
        )
        .into());
    }
    target.assign(&params).map_err(ModelError::from)?;
    Ok(())
}
