use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamSet;
use crate::models::{ModelError, Network, Samples};
use crate::scalar::Scalar;
use crate::training::{train, TrainConfig, TrainError, TrainReport};

/// Named axes, each with a non-empty list of values, in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<(String, Vec<f64>)>,
}

/// One combination of axis values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub values: Vec<(String, f64)>,
}

impl GridPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

impl GridSpec {
    pub fn new(axes: Vec<(String, Vec<f64>)>) -> Result<Self, TrainError> {
        if axes.is_empty() {
            return Err(TrainError::InvalidGrid("no axes".into()));
        }
        for (name, values) in &axes {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::InvalidGrid(format!(
                    "axis {name} needs finite values"
                )));
            }
            if axes.iter().filter(|(n, _)| n == name).count() > 1 {
                return Err(TrainError::InvalidGrid(format!("axis {name} given twice")));
            }
        }
        Ok(Self { axes })
    }

    /// One `name=v1,v2,...` axis per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut axes = Vec::new();
        for line in text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
        {
            let (name, values) = line
                .split_once('=')
                .ok_or_else(|| TrainError::InvalidGrid(format!("expected name=values: {line}")))?;
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| TrainError::InvalidGrid(format!("bad value {v:?} for {name}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            axes.push((name.trim().to_string(), values));
        }
        Self::new(axes)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points; the last axis varies fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        (0..self.len())
            .map(|mut i| {
                let mut values = vec![(String::new(), 0.0); self.axes.len()];
                for (slot, (name, axis)) in values.iter_mut().zip(&self.axes).rev() {
                    *slot = (name.clone(), axis[i % axis.len()]);
                    i /= axis.len();
                }
                GridPoint { values }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult<T: Scalar> {
    pub trial_id: usize,
    pub point: GridPoint,
    pub config: TrainConfig,
    pub best_val_loss: f64,
    pub epochs: usize,
    pub seconds: f64,
    pub report: TrainReport,
    pub params: ParamSet<T>,
}

/// Trains one model per grid point in parallel. Axes naming training options
/// override `template`; the rest are passed to `build` along with the trial
/// seed (`template.seed + trial index`). Successful trials are returned best
/// first, ties broken by trial index.
pub fn grid_search<T, N, F>(
    spec: &GridSpec,
    template: &TrainConfig,
    train_set: &Samples<T>,
    val_set: &Samples<T>,
    build: F,
) -> Result<Vec<TrialResult<T>>, TrainError>
where
    T: Scalar,
    N: Network<T>,
    F: Fn(&GridPoint, u64) -> Result<N, ModelError> + Sync,
{
    let points = spec.points();
    let run = |(trial_id, point): (usize, &GridPoint)| -> Result<TrialResult<T>, TrainError> {
        let start = Instant::now();
        let mut config = template.clone();
        for (k, v) in &point.values {
            config.set(k, &v.to_string())?;
        }
        config.seed = template.seed.wrapping_add(trial_id as u64);
        let mut net = build(point, config.seed)?;
        let report = train(&mut net, train_set, val_set, &config)?;
        if !report.best_val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch: report.history.len(),
                batch: 0,
            });
        }
        Ok(TrialResult {
            trial_id,
            point: point.clone(),
            config,
            best_val_loss: report.best_val_loss,
            epochs: report.epochs_run(),
            seconds: start.elapsed().as_secs_f64(),
            report,
            params: net.params().clone(),
        })
    };
    let outcomes: Vec<Result<TrialResult<T>, TrainError>> =
        points.par_iter().enumerate().map(run).collect();
    let total = outcomes.len();
    let mut results: Vec<TrialResult<T>> = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map_err(|e| log::warn!("trial {i} failed: {e}")).ok())
        .collect();
    if results.is_empty() {
        return Err(TrainError::AllTrialsFailed(total));
    }
    results.sort_by(|a, b| {
        a.best_val_loss
            .total_cmp(&b.best_val_loss)
            .then(a.trial_id.cmp(&b.trial_id))
    });
    Ok(results)
}

/// `trial_id,<axes...>,best_val_loss,epochs,seconds`, one row per result.
pub fn trials_csv<T: Scalar>(spec: &GridSpec, results: &[TrialResult<T>]) -> String {
    let names: Vec<&str> = spec.axes.iter().map(|(n, _)| n.as_str()).collect();
    let mut s = format!(
        "trial_id,{},best_val_loss,epochs,seconds\n",
        names.join(",")
    );
    for r in results {
        let vals: Vec<String> = names
            .iter()
            .map(|n| r.point.get(n).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        s.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            r.trial_id,
            vals.join(","),
            r.best_val_loss,
            r.epochs,
            r.seconds
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{PatchConfig, PatchTst};
    use crate::training::tests::linear_fixture;

    fn build(point: &GridPoint, seed: u64) -> Result<PatchTst<f64>, ModelError> {
        let d = point.get("d_model").unwrap_or(8.0) as usize;
        let cfg = PatchConfig {
            window: 16,
            patch_len: 8,
            stride: 4,
            d_model: d,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            dropout: 0.0,
            ..Default::default()
        };
        PatchTst::new(cfg, 1, seed)
    }

    #[test]
    fn parse_and_enumerate() {
        let g = GridSpec::parse("# axes\nhidden_dim = 64,128\nn_layers=2,3\n\nlearning_rate=0.001")
            .unwrap();
        assert_eq!(g.len(), 4);
        let pts = g.points();
        assert_eq!(
            pts[1].values,
            vec![
                ("hidden_dim".into(), 64.0),
                ("n_layers".into(), 3.0),
                ("learning_rate".into(), 0.001)
            ]
        );
        assert!(pts.iter().any(|p| p.get("hidden_dim") == Some(128.0)
            && p.get("n_layers") == Some(3.0)
            && p.get("learning_rate") == Some(0.001)));
        assert!(GridSpec::parse("a=").is_err());
        assert!(GridSpec::parse("").is_err());
        assert!(GridSpec::parse("a=1\na=2").is_err());
    }

    #[test]
    fn two_by_two_grid_is_ranked() {
        let g = GridSpec::parse("d_model=4,8\nlearning_rate=0.01,0.001").unwrap();
        let data = linear_fixture(16);
        let (tr, va) = (
            data.filter_years(|y| y < 2004),
            data.filter_years(|y| y >= 2004),
        );
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 2,
            ..Default::default()
        };
        let res = grid_search(&g, &cfg, &tr, &va, build).unwrap();
        assert_eq!(res.len(), 4);
        let mut ids: Vec<usize> = res.iter().map(|r| r.trial_id).collect();
        assert!(res
            .windows(2)
            .all(|w| (w[0].best_val_loss, w[0].trial_id) <= (w[1].best_val_loss, w[1].trial_id)));
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        for r in &res {
            assert_eq!(r.config.seed, r.trial_id as u64);
            assert_eq!(
                r.config.learning_rate,
                r.point.get("learning_rate").unwrap()
            );
        }
        assert_eq!(trials_csv(&g, &res).lines().count(), 5);
    }

    #[test]
    fn single_point_and_all_failed() {
        let data = linear_fixture(16);
        let cfg = TrainConfig {
            max_epochs: 2,
            ..Default::default()
        };
        let one = GridSpec::parse("d_model=8").unwrap();
        let res = grid_search(&one, &cfg, &data, &data, build).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].point.get("d_model"), Some(8.0));
        // d_model 3 is not divisible by 2 heads
        let bad = GridSpec::parse("d_model=3").unwrap();
        assert!(matches!(
            grid_search(&bad, &cfg, &data, &data, build),
            Err(TrainError::AllTrialsFailed(1))
        ));
    }
}
