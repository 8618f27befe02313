use serde::{Deserialize, Serialize};

use crate::models::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    /// Tube half-width in target units.
    pub epsilon: f64,
    pub epochs: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            epochs: 1000,
        }
    }
}

/// Linear ε-insensitive regressor. Weights act on standardized features and
/// produce standardized targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    /// Primal objective (standardized units) after each epoch.
    pub objective_history: Vec<f64>,
}

/// `0.5 |w|^2 + C * sum(max(0, |y - w.x - b| - epsilon))`.
pub fn svr_objective(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epsilon: f64,
) -> f64 {
    let reg = 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, t)| (residual(weights, bias, row, *t).abs() - epsilon).max(0.0))
        .sum();
    reg + c * loss
}

fn residual(w: &[f64], b: f64, row: &[f64], t: f64) -> f64 {
    t - b - w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>()
}

fn standardize(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for j in 0..p {
        mean[j] = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
        std[j] = var.sqrt();
    }
    (mean, std)
}

/// Full-batch subgradient descent on the primal with an unregularized bias.
/// The returned iterate is a running average of the raw iterates; each
/// averaging step is shrunk until it does not raise the objective, so the
/// recorded history never increases.
pub fn svr_fit(x: &[Vec<f64>], y: &[f64], config: &SvrConfig) -> Result<SvrModel, ModelError> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(ModelError::EmptyTable);
    }
    if !(config.c > 0.0) || !(config.epsilon >= 0.0) || config.epochs == 0 {
        return Err(ModelError::InvalidConfig(
            "svr needs C > 0, epsilon >= 0 and at least one epoch".into(),
        ));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(ModelError::ShapeMismatch("ragged feature rows".into()));
    }
    let (feature_mean, feature_std) = standardize(x);
    let target_mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - target_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let target_std = if sd > 0.0 { sd } else { 1.0 };
    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            (0..p)
                .map(|j| {
                    if feature_std[j] > 0.0 {
                        (r[j] - feature_mean[j]) / feature_std[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - target_mean) / target_std).collect();
    let eps = config.epsilon / target_std;
    let c = config.c;
    let objective = |w: &[f64], b: f64| svr_objective(w, b, &xs, &ys, c, eps);

    // The objective divided by C*n; its step size does not depend on n.
    let lambda = 1.0 / (c * n as f64);
    let eta0 = 1.0f64.min(1.0 / lambda);
    let (mut w, mut b) = (vec![0.0; p], 0.0);
    let (mut avg_w, mut avg_b) = (w.clone(), b);
    let mut best = objective(&avg_w, avg_b);
    let mut history = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; p];
    for t in 1..=config.epochs {
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = lambda * wi);
        let mut grad_b = 0.0;
        for (row, target) in xs.iter().zip(&ys) {
            let r = residual(&w, b, row, *target);
            if r.abs() > eps {
                let s = -r.signum() / n as f64;
                grad.iter_mut().zip(row).for_each(|(g, v)| *g += s * v);
                grad_b += s;
            }
        }
        let eta = eta0 / (t as f64).sqrt();
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= eta * g);
        b -= eta * grad_b;

        let mut alpha = 1.0 / t as f64;
        for _ in 0..20 {
            let cand_w: Vec<f64> = avg_w
                .iter()
                .zip(&w)
                .map(|(a, wi)| a + alpha * (wi - a))
                .collect();
            let cand_b = avg_b + alpha * (b - avg_b);
            let f = objective(&cand_w, cand_b);
            if f <= best {
                (avg_w, avg_b, best) = (cand_w, cand_b, f);
                break;
            }
            alpha *= 0.5;
        }
        history.push(best);
    }
    Ok(SvrModel {
        weights: avg_w,
        bias: avg_b,
        feature_mean,
        feature_std,
        target_mean,
        target_std,
        objective_history: history,
    })
}

pub fn svr_predict(model: &SvrModel, features: &[f64]) -> f64 {
    let z: f64 = model.bias
        + features
            .iter()
            .enumerate()
            .filter(|(j, _)| model.feature_std[*j] > 0.0)
            .map(|(j, v)| model.weights[j] * (v - model.feature_mean[j]) / model.feature_std[j])
            .sum::<f64>();
    z * model.target_std + model.target_mean
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_points() -> (Vec<Vec<f64>>, Vec<f64>) {
        (vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 2.5, 2.0])
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = three_points();
        for c in [0.1, 1.0, 100.0] {
            let m = svr_fit(
                &x,
                &y,
                &SvrConfig {
                    c,
                    epsilon: 0.1,
                    epochs: 500,
                },
            )
            .unwrap();
            assert!(
                m.objective_history.windows(2).all(|p| p[1] <= p[0]),
                "C={c}"
            );
        }
    }

    #[test]
    fn wide_tube_shrinks_weights() {
        let (x, y) = three_points();
        let narrow = svr_fit(
            &x,
            &y,
            &SvrConfig {
                c: 1.0,
                epsilon: 0.01,
                epochs: 2000,
            },
        )
        .unwrap();
        let wide = svr_fit(
            &x,
            &y,
            &SvrConfig {
                c: 1.0,
                epsilon: 5.0,
                epochs: 2000,
            },
        )
        .unwrap();
        assert!(wide.weights[0].abs() < 1e-3, "{}", wide.weights[0]);
        assert!(narrow.weights[0].abs() > 0.1);
    }

    #[test]
    fn tiny_c_gives_near_zero_weights() {
        let (x, y) = three_points();
        let m = svr_fit(
            &x,
            &y,
            &SvrConfig {
                c: 1e-6,
                epsilon: 0.0,
                epochs: 500,
            },
        )
        .unwrap();
        assert!(m.weights[0].abs() < 1e-4);
    }

    #[test]
    fn linear_data_fits_inside_the_tube() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - r[1] + 1.0).collect();
        let eps = 0.1;
        let m = svr_fit(
            &x,
            &y,
            &SvrConfig {
                c: 1000.0,
                epsilon: eps,
                epochs: 5000,
            },
        )
        .unwrap();
        let loss: f64 = x
            .iter()
            .zip(&y)
            .map(|(r, t)| ((svr_predict(&m, r) - t).abs() - eps).max(0.0))
            .sum();
        assert!(loss < 1e-9, "loss {loss}");
    }

    #[test]
    fn rejects_bad_config() {
        let (x, y) = three_points();
        assert!(svr_fit(
            &x,
            &y,
            &SvrConfig {
                c: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(svr_fit(
            &x,
            &y,
            &SvrConfig {
                epsilon: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
