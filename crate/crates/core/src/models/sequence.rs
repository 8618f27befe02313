use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::autodiff::{ParamSet, RngState, Tape, Var};
use crate::features::{BaselineTable, Split};
use crate::ingest::JJAS_DAYS;
use crate::models::layers::{add_linear, add_lstm, glorot, linear, lstm_stack, Bound};
use crate::models::{conv1d, Mode, ModelError, Network, Samples};
use crate::scalar::Scalar;

/// Days averaged into one sequence step when a lookback table is turned into sequences.
pub const DEFAULT_POOL_DAYS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub dropout: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            n_layers: 2,
            dropout: 0.0,
        }
    }
}

/// Stacked LSTM over raw time steps with a linear head on the final state.
#[derive(Clone, Debug)]
pub struct LstmBaseline<T: Scalar> {
    pub config: LstmConfig,
    steps: usize,
    channels: usize,
    horizon: usize,
    params: ParamSet<T>,
}

impl<T: Scalar> LstmBaseline<T> {
    pub fn new(
        config: LstmConfig,
        steps: usize,
        channels: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if config.hidden_dim == 0
            || config.n_layers == 0
            || steps == 0
            || channels == 0
            || horizon == 0
        {
            return Err(ModelError::InvalidConfig(
                "LSTM dimensions must be positive".into(),
            ));
        }
        let mut rng = RngState::seeded(seed);
        let mut params = ParamSet::new();
        add_lstm(
            &mut params,
            &mut rng,
            "lstm",
            channels,
            config.hidden_dim,
            config.n_layers,
        );
        add_linear(&mut params, &mut rng, "head", config.hidden_dim, horizon);
        Ok(Self {
            config,
            steps,
            channels,
            horizon,
            params,
        })
    }
}

impl<T: Scalar> Network<T> for LstmBaseline<T> {
    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn forward(
        &self,
        tape: &Tape<T>,
        params: &[Var],
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        let b = Bound {
            params: &self.params,
            vars: params,
        };
        let h = lstm_stack(tape, &b, "lstm", x, self.config.n_layers)?;
        let h = mode.dropout(tape, h, self.config.dropout)?;
        linear(tape, &b, "head", h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters: usize,
    pub kernel: usize,
    pub n_layers: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters: 16,
            kernel: 3,
            n_layers: 2,
            dropout: 0.0,
        }
    }
}

/// Valid 1-D convolutions with ReLU, mean pooling over time, linear head.
#[derive(Clone, Debug)]
pub struct CnnBaseline<T: Scalar> {
    pub config: CnnConfig,
    steps: usize,
    channels: usize,
    horizon: usize,
    params: ParamSet<T>,
}

impl<T: Scalar> CnnBaseline<T> {
    pub fn new(
        config: CnnConfig,
        steps: usize,
        channels: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if config.filters == 0
            || config.kernel == 0
            || config.n_layers == 0
            || channels == 0
            || horizon == 0
        {
            return Err(ModelError::InvalidConfig(
                "CNN dimensions must be positive".into(),
            ));
        }
        if steps < config.n_layers * (config.kernel - 1) + 1 {
            return Err(ModelError::InvalidConfig(format!(
                "{steps} steps too short for {} convolutions",
                config.n_layers
            )));
        }
        let mut rng = RngState::seeded(seed);
        let mut params = ParamSet::new();
        for l in 0..config.n_layers {
            let c_in = if l == 0 { channels } else { config.filters };
            let fan_in = config.kernel * c_in;
            params.insert(
                format!("conv.{l}.w"),
                glorot(&mut rng, &[fan_in, config.filters], fan_in, config.filters),
            );
            params.insert(format!("conv.{l}.b"), Tensor::zeros(&[config.filters]));
        }
        add_linear(&mut params, &mut rng, "head", config.filters, horizon);
        Ok(Self {
            config,
            steps,
            channels,
            horizon,
            params,
        })
    }
}

impl<T: Scalar> Network<T> for CnnBaseline<T> {
    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn forward(
        &self,
        tape: &Tape<T>,
        params: &[Var],
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        let b = Bound {
            params: &self.params,
            vars: params,
        };
        let mut h = x;
        for l in 0..self.config.n_layers {
            h = conv1d(
                tape,
                h,
                b.get(&format!("conv.{l}.w")),
                b.get(&format!("conv.{l}.b")),
                self.config.kernel,
            )?;
            h = tape.relu(h)?;
        }
        let pooled = tape.mean_axis(h, 1)?;
        let pooled = mode.dropout(tape, pooled, self.config.dropout)?;
        linear(tape, &b, "head", pooled)
    }
}

/// Standardization for lookback tables, fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableScaler {
    pub rain_mean: f64,
    pub rain_std: f64,
    pub nino_mean: f64,
    pub nino_std: f64,
    pub pool: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
}

impl TableScaler {
    pub fn fit(table: &BaselineTable, pool: usize) -> Result<Self, ModelError> {
        if pool == 0 {
            return Err(ModelError::InvalidConfig("pool must be positive".into()));
        }
        let train: Vec<&Vec<f64>> = (0..table.len())
            .filter(|&i| table.splits[i] == Split::Train)
            .map(|i| &table.features[i])
            .collect();
        if train.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        let rain_len = table.lookback as usize * JJAS_DAYS;
        let (rain_mean, rain_std) =
            mean_std(train.iter().flat_map(|f| f[..rain_len].iter().copied()));
        let (nino_mean, nino_std) = if table.variant.uses_nino() {
            mean_std(
                train
                    .iter()
                    .flat_map(|f| f[rain_len..rain_len + 13].iter().copied()),
            )
        } else {
            (0.0, 1.0)
        };
        Ok(Self {
            rain_mean,
            rain_std,
            nino_mean,
            nino_std,
            pool,
        })
    }

    /// Seasonal total (mm) from a scaled mean-daily-rain output.
    pub fn total_from_output(&self, z: f64) -> f64 {
        (z * self.rain_std + self.rain_mean).max(0.0) * JJAS_DAYS as f64
    }

    pub fn steps(&self, lookback: u8) -> usize {
        lookback as usize * JJAS_DAYS.div_ceil(self.pool)
    }
}

/// Turns table rows into sequences: each lookback season is averaged in
/// blocks of `pool` days, and every exogenous value becomes a constant
/// channel. Targets are the season's mean daily rain in scaled units.
pub fn table_sequences(
    table: &BaselineTable,
    scaler: &TableScaler,
    split: Option<Split>,
) -> Samples<f64> {
    let rain_len = table.lookback as usize * JJAS_DAYS;
    let exo = table.variant.exo_len();
    let channels = 1 + exo;
    let steps = scaler.steps(table.lookback);
    let mut s = Samples {
        steps,
        channels,
        horizon: 1,
        inputs: vec![],
        targets: vec![],
        tags: vec![],
    };
    for i in 0..table.len() {
        if split.is_some_and(|sp| table.splits[i] != sp) {
            continue;
        }
        let f = &table.features[i];
        let exo_values: Vec<f64> = f[rain_len..]
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if table.variant.uses_nino() && j < 13 {
                    (v - scaler.nino_mean) / scaler.nino_std
                } else {
                    v
                }
            })
            .collect();
        for season in f[..rain_len].chunks(JJAS_DAYS) {
            for block in season.chunks(scaler.pool) {
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                s.inputs.push((mean - scaler.rain_mean) / scaler.rain_std);
                s.inputs.extend_from_slice(&exo_values);
            }
        }
        s.targets
            .push((table.targets[i] / JJAS_DAYS as f64 - scaler.rain_mean) / scaler.rain_std);
        s.tags.push((table.years[i], 0));
    }
    debug_assert_eq!(s.inputs.len(), s.len() * steps * channels);
    s
}
