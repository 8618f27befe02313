use crate::autodiff::{ParamSet, RngState, Tape, Tensor, Var};
use crate::models::ModelError;
use crate::scalar::Scalar;

/// Parameter handles of one forward pass, looked up by name.
pub struct Bound<'a, T: Scalar> {
    pub params: &'a ParamSet<T>,
    pub vars: &'a [Var],
}

impl<T: Scalar> Bound<'_, T> {
    pub fn get(&self, name: &str) -> Var {
        let i = self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("parameter {name} not registered"));
        self.vars[i]
    }
}

/// Uniform Glorot initialization.
pub fn glorot<T: Scalar>(
    rng: &mut RngState,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), rng.uniform_vec(n, bound)).expect("shape matches")
}

pub(crate) fn add_linear<T: Scalar>(
    ps: &mut ParamSet<T>,
    rng: &mut RngState,
    name: &str,
    fan_in: usize,
    fan_out: usize,
) {
    ps.insert(
        format!("{name}.w"),
        glorot(rng, &[fan_in, fan_out], fan_in, fan_out),
    );
    ps.insert(format!("{name}.b"), Tensor::zeros(&[fan_out]));
}

pub(crate) fn linear<T: Scalar>(
    tape: &Tape<T>,
    b: &Bound<'_, T>,
    name: &str,
    x: Var,
) -> Result<Var, ModelError> {
    let y = tape.matmul(x, b.get(&format!("{name}.w")))?;
    Ok(tape.add(y, b.get(&format!("{name}.b")))?)
}

pub(crate) fn add_norm<T: Scalar>(ps: &mut ParamSet<T>, name: &str, dim: usize) {
    ps.insert(format!("{name}.gamma"), Tensor::ones(&[dim]));
    ps.insert(format!("{name}.beta"), Tensor::zeros(&[dim]));
}

pub(crate) fn norm<T: Scalar>(
    tape: &Tape<T>,
    b: &Bound<'_, T>,
    name: &str,
    x: Var,
) -> Result<Var, ModelError> {
    let n = tape.layer_norm(x, T::of(1e-5))?;
    let n = tape.mul(n, b.get(&format!("{name}.gamma")))?;
    Ok(tape.add(n, b.get(&format!("{name}.beta")))?)
}

/// Multi-head self-attention over `[m, n, d]` tokens. When `trace` is
/// given, the `[m * heads, n, n]` attention weights are pushed to it.
pub(crate) fn self_attention<T: Scalar>(
    tape: &Tape<T>,
    b: &Bound<'_, T>,
    name: &str,
    x: Var,
    heads: usize,
    trace: Option<&mut Vec<Tensor<T>>>,
) -> Result<Var, ModelError> {
    let shape = tape.shape(x);
    let (m, n, d) = (shape[0], shape[1], shape[2]);
    let dh = d / heads;
    let split = |v: Var| -> Result<Var, ModelError> {
        let v = tape.reshape(v, &[m, n, heads, dh])?;
        let v = tape.permute(v, &[0, 2, 1, 3])?;
        Ok(tape.reshape(v, &[m * heads, n, dh])?)
    };
    let q = split(linear(tape, b, &format!("{name}.q"), x)?)?;
    let k = split(linear(tape, b, &format!("{name}.k"), x)?)?;
    let v = split(linear(tape, b, &format!("{name}.v"), x)?)?;
    let scores = tape.batch_matmul(q, tape.transpose(k)?)?;
    let scores = tape.mul_scalar(scores, T::of(1.0 / (dh as f64).sqrt()))?;
    let weights = tape.softmax(scores, 2)?;
    if let Some(t) = trace {
        t.push(tape.value(weights).clone());
    }
    let ctx = tape.batch_matmul(weights, v)?;
    let ctx = tape.reshape(ctx, &[m, heads, n, dh])?;
    let ctx = tape.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = tape.reshape(ctx, &[m, n, d])?;
    linear(tape, b, &format!("{name}.o"), ctx)
}

pub(crate) fn add_attention<T: Scalar>(
    ps: &mut ParamSet<T>,
    rng: &mut RngState,
    name: &str,
    d: usize,
) {
    for p in ["q", "k", "v", "o"] {
        add_linear(ps, rng, &format!("{name}.{p}"), d, d);
    }
}

/// Registers `layers` LSTM layers named `{name}.{l}`.
pub(crate) fn add_lstm<T: Scalar>(
    ps: &mut ParamSet<T>,
    rng: &mut RngState,
    name: &str,
    input: usize,
    hidden: usize,
    layers: usize,
) {
    for l in 0..layers {
        let fan_in = if l == 0 { input } else { hidden };
        ps.insert(
            format!("{name}.{l}.wx"),
            glorot(rng, &[fan_in, 4 * hidden], fan_in, hidden),
        );
        ps.insert(
            format!("{name}.{l}.wh"),
            glorot(rng, &[hidden, 4 * hidden], hidden, hidden),
        );
        // gate order: input, forget, cell, output; forget bias starts at 1
        let mut bias = vec![T::zero(); 4 * hidden];
        bias[hidden..2 * hidden]
            .iter_mut()
            .for_each(|v| *v = T::one());
        ps.insert(
            format!("{name}.{l}.b"),
            Tensor::new(vec![4 * hidden], bias).expect("shape"),
        );
    }
}

/// Stacked LSTM over `[m, steps, input]`; returns the last layer's final
/// hidden state `[m, hidden]`. Initial states are zero.
pub fn lstm_stack<T: Scalar>(
    tape: &Tape<T>,
    b: &Bound<'_, T>,
    name: &str,
    x: Var,
    layers: usize,
) -> Result<Var, ModelError> {
    let shape = tape.shape(x);
    let (m, steps) = (shape[0], shape[1]);
    let mut seq = x;
    let mut last = None;
    for l in 0..layers {
        let wh = b.get(&format!("{name}.{l}.wh"));
        let hidden = tape.shape(wh)[0];
        let xw = tape.matmul(seq, b.get(&format!("{name}.{l}.wx")))?;
        let xw = tape.add(xw, b.get(&format!("{name}.{l}.b")))?;
        let mut state: Option<(Var, Var)> = None;
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let g = tape.reshape(tape.slice(xw, 1, t, 1)?, &[m, 4 * hidden])?;
            let g = match state {
                Some((h, _)) => tape.add(g, tape.matmul(h, wh)?)?,
                None => g,
            };
            let i = tape.sigmoid(tape.slice(g, 1, 0, hidden)?)?;
            let f = tape.sigmoid(tape.slice(g, 1, hidden, hidden)?)?;
            let cand = tape.tanh(tape.slice(g, 1, 2 * hidden, hidden)?)?;
            let o = tape.sigmoid(tape.slice(g, 1, 3 * hidden, hidden)?)?;
            let c = match state {
                Some((_, c)) => tape.add(tape.mul(f, c)?, tape.mul(i, cand)?)?,
                None => tape.mul(i, cand)?,
            };
            let h = tape.mul(o, tape.tanh(c)?)?;
            state = Some((h, c));
            if l + 1 < layers {
                outputs.push(tape.reshape(h, &[m, 1, hidden])?);
            }
        }
        last = state.map(|(h, _)| h);
        if l + 1 < layers {
            seq = tape.concat(&outputs, 1)?;
        }
    }
    last.ok_or_else(|| ModelError::ShapeMismatch("LSTM over an empty sequence".into()))
}

/// Valid 1-D convolution over time: `[b, t, c]` with weights
/// `[kernel * c, filters]` (offset-major) gives `[b, t - kernel + 1, filters]`.
pub fn conv1d<T: Scalar>(
    tape: &Tape<T>,
    x: Var,
    w: Var,
    bias: Var,
    kernel: usize,
) -> Result<Var, ModelError> {
    let steps = tape.shape(x)[1];
    if steps < kernel {
        return Err(ModelError::ShapeMismatch(format!(
            "{steps} steps for kernel {kernel}"
        )));
    }
    let out = steps - kernel + 1;
    let cols = if kernel == 1 {
        x
    } else {
        let parts: Vec<Var> = (0..kernel)
            .map(|j| tape.slice(x, 1, j, out))
            .collect::<Result<_, _>>()?;
        tape.concat(&parts, 2)?
    };
    Ok(tape.add(tape.matmul(cols, w)?, bias)?)
}
