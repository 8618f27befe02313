use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, RngState, Tape, Tensor, Var};
use crate::models::layers::{
    add_attention, add_linear, add_lstm, add_norm, linear, lstm_stack, norm, self_attention, Bound,
};
use crate::models::{Mode, ModelError, Network};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Attention,
    Recurrent,
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attention" => Ok(Self::Attention),
            "recurrent" => Ok(Self::Recurrent),
            other => Err(format!(
                "unknown encoder {other:?} (expected attention|recurrent)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub patch_len: usize,
    pub stride: usize,
    pub pad_end: bool,
    pub d_model: usize,
    pub n_heads: usize,
    /// Encoder depth, attention blocks or LSTM layers.
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub encoder: EncoderKind,
    pub hidden_dim: usize,
    pub window: usize,
    pub horizon: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            patch_len: 16,
            stride: 8,
            pad_end: true,
            d_model: 32,
            n_heads: 4,
            n_layers: 3,
            d_ff: 64,
            dropout: 0.1,
            encoder: EncoderKind::Attention,
            hidden_dim: 128,
            window: 30,
            horizon: 1,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.window < self.patch_len {
            return Err(ModelError::WindowShorterThanPatch {
                w: self.window,
                p: self.patch_len,
            });
        }
        if self.patch_len == 0 || self.stride == 0 || self.stride > self.patch_len {
            return bad(format!(
                "need 1 <= stride ({}) <= patch_len ({})",
                self.stride, self.patch_len
            ));
        }
        if self.n_heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.n_layers == 0 || self.horizon == 0 || self.hidden_dim == 0 || self.d_ff == 0 {
            return bad("layers, horizon, hidden_dim and d_ff must be positive".into());
        }
        Ok(())
    }

    pub fn num_patches(&self) -> usize {
        patch_count(self.window, self.patch_len, self.stride, self.pad_end)
    }

    /// Width of one channel's encoded representation.
    pub fn encoded_width(&self) -> usize {
        match self.encoder {
            EncoderKind::Attention => self.num_patches() * self.d_model,
            EncoderKind::Recurrent => self.hidden_dim,
        }
    }
}

pub fn patch_count(w: usize, p: usize, s: usize, pad_end: bool) -> usize {
    (w + if pad_end { s } else { 0 } - p) / s + 1
}

/// Splits a series into patches `[i*s, i*s + p)`. With `pad_end` the last
/// value is first repeated `s` times.
pub fn patchify<T: Copy>(
    series: &[T],
    p: usize,
    s: usize,
    pad_end: bool,
) -> Result<Vec<Vec<T>>, ModelError> {
    let w = series.len();
    if w < p {
        return Err(ModelError::WindowShorterThanPatch { w, p });
    }
    if p == 0 || s == 0 {
        return Err(ModelError::InvalidConfig(
            "patch length and stride must be positive".into(),
        ));
    }
    let last = series[w - 1];
    let at = |i: usize| if i < w { series[i] } else { last };
    Ok((0..patch_count(w, p, s, pad_end))
        .map(|i| (i * s..i * s + p).map(at).collect())
        .collect())
}

/// Channel-independent patched forecaster: every channel is patched,
/// embedded and encoded with shared weights, then one linear head reads
/// all channels' encodings and forecasts the rain channel.
#[derive(Clone, Debug)]
pub struct PatchTst<T: Scalar> {
    pub config: PatchConfig,
    channels: usize,
    params: ParamSet<T>,
    /// `[window, patches * patch_len]` 0/1 gather matrix.
    unfold: Tensor<T>,
}

impl<T: Scalar> PatchTst<T> {
    pub fn new(config: PatchConfig, channels: usize, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if channels == 0 {
            return Err(ModelError::InvalidConfig("at least one channel".into()));
        }
        let mut rng = RngState::seeded(seed);
        let mut ps = ParamSet::new();
        let (p, d, n) = (config.patch_len, config.d_model, config.num_patches());
        add_linear(&mut ps, &mut rng, "embed", p, d);
        ps.insert(
            "pos",
            Tensor::new(vec![n, d], rng.uniform_vec(n * d, 0.02)).expect("shape"),
        );
        match config.encoder {
            EncoderKind::Attention => {
                for l in 0..config.n_layers {
                    add_norm(&mut ps, &format!("enc.{l}.norm1"), d);
                    add_attention(&mut ps, &mut rng, &format!("enc.{l}.attn"), d);
                    add_norm(&mut ps, &format!("enc.{l}.norm2"), d);
                    add_linear(&mut ps, &mut rng, &format!("enc.{l}.ff1"), d, config.d_ff);
                    add_linear(&mut ps, &mut rng, &format!("enc.{l}.ff2"), config.d_ff, d);
                }
                add_norm(&mut ps, "enc.norm", d);
            }
            EncoderKind::Recurrent => add_lstm(
                &mut ps,
                &mut rng,
                "lstm",
                d,
                config.hidden_dim,
                config.n_layers,
            ),
        }
        add_linear(
            &mut ps,
            &mut rng,
            "head",
            channels * config.encoded_width(),
            config.horizon,
        );

        let mut unfold = vec![T::zero(); config.window * n * p];
        for i in 0..n {
            for j in 0..p {
                let src = (i * config.stride + j).min(config.window - 1);
                unfold[src * n * p + i * p + j] = T::one();
            }
        }
        let unfold = Tensor::new(vec![config.window, n * p], unfold).expect("shape");
        Ok(Self {
            config,
            channels,
            params: ps,
            unfold,
        })
    }

    /// `[m, window]` univariate series to `[m, patches, d_model]` tokens.
    pub fn embed(&self, tape: &Tape<T>, b: &Bound<'_, T>, series: Var) -> Result<Var, ModelError> {
        let m = tape.shape(series)[0];
        let (n, p) = (self.config.num_patches(), self.config.patch_len);
        let patches = tape.matmul(series, tape.constant(self.unfold.clone()))?;
        let patches = tape.reshape(patches, &[m, n, p])?;
        let tokens = linear(tape, b, "embed", patches)?;
        Ok(tape.add(tokens, b.get("pos"))?)
    }

    /// Attention: `[m, n, d] -> [m, n, d]`. Recurrent: `[m, n, d] -> [m, hidden]`.
    pub fn encode_tokens(
        &self,
        tape: &Tape<T>,
        b: &Bound<'_, T>,
        tokens: Var,
        mode: &mut Mode<'_>,
        mut trace: Option<&mut Vec<Tensor<T>>>,
    ) -> Result<Var, ModelError> {
        let c = &self.config;
        match c.encoder {
            EncoderKind::Attention => {
                let mut x = tokens;
                for l in 0..c.n_layers {
                    let h = norm(tape, b, &format!("enc.{l}.norm1"), x)?;
                    let a = self_attention(
                        tape,
                        b,
                        &format!("enc.{l}.attn"),
                        h,
                        c.n_heads,
                        trace.as_deref_mut(),
                    )?;
                    x = tape.add(x, mode.dropout(tape, a, c.dropout)?)?;
                    let h = norm(tape, b, &format!("enc.{l}.norm2"), x)?;
                    let f = tape.relu(linear(tape, b, &format!("enc.{l}.ff1"), h)?)?;
                    let f = linear(tape, b, &format!("enc.{l}.ff2"), f)?;
                    x = tape.add(x, mode.dropout(tape, f, c.dropout)?)?;
                }
                norm(tape, b, "enc.norm", x)
            }
            EncoderKind::Recurrent => lstm_stack(tape, b, "lstm", tokens, c.n_layers),
        }
    }

    /// `[batch, window, channels]` to per-channel encodings `[batch, channels, width]`.
    pub fn encode(
        &self,
        tape: &Tape<T>,
        b: &Bound<'_, T>,
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        let shape = tape.shape(x);
        if shape.len() != 3 || shape[1] != self.config.window || shape[2] != self.channels {
            return Err(ModelError::ShapeMismatch(format!(
                "input {shape:?}, expected [batch, {}, {}]",
                self.config.window, self.channels
            )));
        }
        let batch = shape[0];
        let series = tape.reshape(
            tape.permute(x, &[0, 2, 1])?,
            &[batch * self.channels, self.config.window],
        )?;
        let tokens = self.embed(tape, b, series)?;
        let z = self.encode_tokens(tape, b, tokens, mode, None)?;
        Ok(tape.reshape(z, &[batch, self.channels, self.config.encoded_width()])?)
    }

    /// Linear map from all channels' flattened encodings to the horizon.
    pub fn head(
        &self,
        tape: &Tape<T>,
        b: &Bound<'_, T>,
        encoded: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        let batch = tape.shape(encoded)[0];
        let flat = tape.reshape(
            encoded,
            &[batch, self.channels * self.config.encoded_width()],
        )?;
        let flat = mode.dropout(tape, flat, self.config.dropout)?;
        linear(tape, b, "head", flat)
    }
}

impl<T: Scalar> Network<T> for PatchTst<T> {
    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn steps(&self) -> usize {
        self.config.window
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn horizon(&self) -> usize {
        self.config.horizon
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
        let z = self.encode(tape, &b, x, mode)?;
        self.head(tape, &b, z, mode)
    }
}
