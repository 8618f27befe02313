//! Resolved options: defaults, then the `key=value` config file, then flags.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use monsoon_core::evaluation::RmseConvention;
use monsoon_core::features::DatasetVariant;
use monsoon_core::models::{GbtConfig, OlsConfig, SvrConfig, DEFAULT_POOL_DAYS};
use monsoon_core::training::TrainConfig;
use serde_json::json;

use crate::pipeline::{NetSpec, DEFAULT_SPLIT_BOUNDARY};

/// Options for the classical and table-sequence baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSettings {
    pub ols: OlsConfig,
    pub gbt: GbtConfig,
    pub svr: SvrConfig,
    /// Days per step when lookback tables become sequences.
    pub pool_days: usize,
    /// Epoch cap for the LSTM and CNN table baselines.
    pub max_epochs: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            ols: OlsConfig::default(),
            gbt: GbtConfig::default(),
            svr: SvrConfig::default(),
            pool_days: DEFAULT_POOL_DAYS,
            max_epochs: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub variant: DatasetVariant,
    pub split_boundary: i32,
    pub rmse_convention: RmseConvention,
    pub net: NetSpec,
    pub train: TrainConfig,
    pub baselines: BaselineSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            variant: DatasetVariant::D4,
            split_boundary: DEFAULT_SPLIT_BOUNDARY,
            rmse_convention: RmseConvention::Printed,
            net: NetSpec::default(),
            train: TrainConfig::default(),
            baselines: BaselineSettings::default(),
        }
    }
}

/// Error for bad command-line usage (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!("config line {}: expected key=value", i + 1)));
        };
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| usage(format!("{key}: cannot parse {value:?}")))
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let key = key.as_str();
        let b = &mut self.baselines;
        match key {
            "variant" => {
                self.variant = value
                    .parse()
                    .map_err(|e: monsoon_core::features::FeatureError| usage(e.to_string()))?
            }
            "split_boundary" => self.split_boundary = num(key, value)?,
            "rmse_convention" => self.rmse_convention = value.parse().map_err(usage)?,
            "ridge" => {
                b.ols.ridge_fallback = if value == "none" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "gbt_rounds" => b.gbt.rounds = num(key, value)?,
            "gbt_max_depth" => b.gbt.max_depth = num(key, value)?,
            "gbt_eta" => b.gbt.eta = num(key, value)?,
            "gbt_min_leaf" => b.gbt.min_leaf = num(key, value)?,
            "svr_c" => b.svr.c = num(key, value)?,
            "svr_epsilon" => b.svr.epsilon = num(key, value)?,
            "svr_epochs" => b.svr.epochs = num(key, value)?,
            "pool_days" => b.pool_days = num(key, value)?,
            "baseline_epochs" => b.max_epochs = num(key, value)?,
            _ => {
                let known = self
                    .train
                    .set(key, value)
                    .map_err(|e| usage(e.to_string()))?
                    || self.net.set(key, value).map_err(|e| usage(e.to_string()))?;
                if !known {
                    return Err(usage(format!("unknown option {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        self.net
            .patch
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        Ok(())
    }

    /// Every option with its effective value, for run manifests.
    pub fn to_json(&self) -> serde_json::Value {
        let n = &self.net;
        json!({
            "variant": self.variant.tag(),
            "split_boundary": self.split_boundary,
            "rmse_convention": format!("{:?}", self.rmse_convention).to_lowercase(),
            "model": n.kind.to_string(),
            "mode": format!("{:?}", n.mode).to_lowercase(),
            "patch": n.patch,
            "lstm": n.lstm,
            "cnn": n.cnn,
            "train": self.train,
            "baselines": {
                "ols": self.baselines.ols,
                "gbt": self.baselines.gbt,
                "svr": self.baselines.svr,
                "pool_days": self.baselines.pool_days,
                "max_epochs": self.baselines.max_epochs,
            },
        })
    }
}

/// Splits `key=value` from a `--set` flag.
pub fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

pub fn read_optional(path: Option<&Path>) -> Result<Vec<(String, String)>> {
    path.map(read_config_file)
        .transpose()
        .map(Option::unwrap_or_default)
        .context("reading config")
}
