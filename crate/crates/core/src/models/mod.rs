//! Forecasters: the patched transformer, recurrent and convolutional
//! sequence baselines, and the classical regression baselines.

mod gbt;
mod layers;
mod ols;
mod patch;
mod rollout;
mod sequence;
mod svr;

use thiserror::Error;

use crate::autodiff::{AutodiffError, ParamSet, RngState, Tape, Tensor, Var};
use crate::features::{FeatureError, WindowedBatch};
use crate::scalar::Scalar;

pub use gbt::{gbt_fit, gbt_predict, GbtConfig, Tree, TreeEnsemble, TreeNode};
pub use layers::{conv1d, glorot, lstm_stack, Bound};
pub use ols::{ols_fit, ols_predict, OlsConfig, OlsModel};
pub use patch::{patch_count, patchify, EncoderKind, PatchConfig, PatchTst};
pub use rollout::{
    direct_inputs, direct_total_from_output, rollout_season, seed_window, SeasonForecast,
};
pub use sequence::{
    table_sequences, CnnBaseline, CnnConfig, LstmBaseline, LstmConfig, TableScaler,
    DEFAULT_POOL_DAYS,
};
pub use svr::{svr_fit, svr_objective, svr_predict, SvrConfig, SvrModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("window of {w} days is shorter than the {p}-day patch")]
    WindowShorterThanPatch { w: usize, p: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing exogenous input: {0}")]
    MissingExogenous(String),
    #[error("year {0} has no prior season to seed the rollout")]
    MissingSeed(i32),
    #[error("singular system; enable the ridge fallback or add rows")]
    SingularSystem,
    #[error("empty training table")]
    EmptyTable,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Whether a forward pass applies dropout.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut RngState),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    /// Applies inverted dropout in training mode; identity otherwise.
    pub fn dropout<T: Scalar>(
        &mut self,
        tape: &Tape<T>,
        x: Var,
        rate: f64,
    ) -> Result<Var, ModelError> {
        match self {
            Mode::Train(rng) if rate > 0.0 => {
                let n = tape.value(x).len();
                let keep = rng.bernoulli_keep_mask(n, rate);
                Ok(tape.dropout(x, &keep, T::of(rate))?)
            }
            _ => Ok(x),
        }
    }
}

/// A differentiable forecaster mapping `[batch, steps, channels]` inputs to
/// `[batch, horizon]` outputs in scaled units.
pub trait Network<T: Scalar> {
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;
    fn steps(&self) -> usize;
    fn channels(&self) -> usize;
    fn horizon(&self) -> usize;
    fn forward(
        &self,
        tape: &Tape<T>,
        params: &[Var],
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError>;

    /// Evaluates `rows` flat inputs (each `steps * channels` long, day-major)
    /// in chunks; returns `rows * horizon` outputs.
    fn predict(&self, inputs: &[T], rows: usize) -> Result<Vec<T>, ModelError> {
        let width = self.steps() * self.channels();
        if inputs.len() != rows * width {
            return Err(ModelError::ShapeMismatch(format!(
                "{} values for {rows} rows of {width}",
                inputs.len()
            )));
        }
        let mut out = Vec::with_capacity(rows * self.horizon());
        const CHUNK: usize = 1024;
        for start in (0..rows).step_by(CHUNK) {
            let n = CHUNK.min(rows - start);
            let tape = Tape::new();
            let p = tape.bind(self.params());
            let x = Tensor::new(
                vec![n, self.steps(), self.channels()],
                inputs[start * width..(start + n) * width].to_vec(),
            )?;
            let x = tape.constant(x);
            let y = self.forward(&tape, &p, x, &mut Mode::Eval)?;
            out.extend_from_slice(tape.value(y).data());
        }
        Ok(out)
    }
}

/// Supervised rows for a [`Network`]: flat day-major inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples<T> {
    pub steps: usize,
    pub channels: usize,
    pub horizon: usize,
    /// `len * steps * channels` values.
    pub inputs: Vec<T>,
    /// `len * horizon` values.
    pub targets: Vec<T>,
    /// `(year, start offset)` per row.
    pub tags: Vec<(i32, usize)>,
}

impl<T: Scalar> Samples<T> {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// No rows, same geometry as `other`.
    pub fn empty_like(other: &Self) -> Self {
        Self {
            steps: other.steps,
            channels: other.channels,
            horizon: other.horizon,
            inputs: vec![],
            targets: vec![],
            tags: vec![],
        }
    }

    pub fn width(&self) -> usize {
        self.steps * self.channels
    }

    pub fn from_windows(batch: &WindowedBatch) -> Self {
        Self {
            steps: batch.w,
            channels: batch.channels,
            horizon: batch.h,
            inputs: batch.inputs.iter().flatten().map(|&v| T::of(v)).collect(),
            targets: batch.targets.iter().flatten().map(|&v| T::of(v)).collect(),
            tags: batch.origins.clone(),
        }
    }

    /// Rows at `idx`, in that order, as `[n, steps, channels]` and `[n, horizon]` tensors.
    pub fn gather(&self, idx: &[usize]) -> (Tensor<T>, Tensor<T>) {
        let (w, h) = (self.width(), self.horizon);
        let mut x = Vec::with_capacity(idx.len() * w);
        let mut y = Vec::with_capacity(idx.len() * h);
        for &i in idx {
            x.extend_from_slice(&self.inputs[i * w..(i + 1) * w]);
            y.extend_from_slice(&self.targets[i * h..(i + 1) * h]);
        }
        (
            Tensor::new(vec![idx.len(), self.steps, self.channels], x).expect("sample shape"),
            Tensor::new(vec![idx.len(), h], y).expect("sample shape"),
        )
    }

    /// Rows whose year satisfies `keep`.
    pub fn filter_years(&self, keep: impl Fn(i32) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.tags[i].0)).collect();
        let (w, h) = (self.width(), self.horizon);
        Self {
            steps: self.steps,
            channels: self.channels,
            horizon: h,
            inputs: idx
                .iter()
                .flat_map(|&i| self.inputs[i * w..(i + 1) * w].iter().copied())
                .collect(),
            targets: idx
                .iter()
                .flat_map(|&i| self.targets[i * h..(i + 1) * h].iter().copied())
                .collect(),
            tags: idx.iter().map(|&i| self.tags[i]).collect(),
        }
    }
}
