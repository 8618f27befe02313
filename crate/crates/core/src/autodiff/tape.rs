//! Reverse-mode tape. Nodes are appended in evaluation order, so the
//! insertion order is a topological order and backward is a single reverse
//! sweep.

use std::cell::{Ref, RefCell};

use crate::autodiff::params::ParamSet;
use crate::autodiff::tensor::{axis_extents, strides, Tensor};
use crate::autodiff::AutodiffError;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    /// `b` is broadcast over the leading axes of `a`.
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddScalar(usize),
    MulScalar(usize, T),
    /// `[.., k] x [k, n]`
    MatMul(usize, usize),
    /// `[.., m, k] x [.., k, n]` with equal leading axes.
    BatchMatMul(usize, usize),
    Permute(usize, Vec<usize>),
    Reshape(usize),
    Concat(Vec<usize>, usize),
    Slice(usize, usize, usize),
    Sum(usize, usize),
    Mean(usize, usize),
    SumAll(usize),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Exp(usize),
    Log(usize),
    Softmax(usize, usize),
    LayerNorm(usize, Vec<T>),
    Dropout(usize, Vec<T>),
    Mse(usize, usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `v`; zero if `v` is off the path.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Gradients for a bound parameter list, in binding order.
    pub fn collect(&self, bound: &[Var]) -> Vec<Tensor<T>> {
        bound.iter().map(|&v| self.wrt(v)).collect()
    }
}

fn is_suffix(big: &[usize], small: &[usize]) -> bool {
    small.len() <= big.len() && big[big.len() - small.len()..] == *small
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable leaf.
    pub fn param(&self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    /// Records every tensor of `params` as a trainable leaf, in order.
    pub fn bind(&self, params: &ParamSet<T>) -> Vec<Var> {
        params
            .tensors()
            .iter()
            .map(|t| self.param(t.clone()))
            .collect()
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor<T>> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    fn push_raw(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn push(
        &self,
        name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
        parents: &[usize],
    ) -> Result<Var, AutodiffError> {
        if !value.all_finite() {
            return Err(AutodiffError::NonFiniteValue { op: name });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].requires_grad)
        };
        Ok(self.push_raw(value, op, requires_grad))
    }

    fn binary_broadcast(
        &self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>, AutodiffError> {
        let nodes = self.nodes.borrow();
        let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
        if !is_suffix(x.shape(), y.shape()) {
            return Err(AutodiffError::shape(
                name,
                format!("{:?} vs {:?}", x.shape(), y.shape()),
            ));
        }
        let m = y.len();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &xv)| f(xv, y.data()[i % m]))
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    /// Elementwise sum; `b` may be a suffix of `a`'s shape and is then broadcast.
    pub fn add(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = self.binary_broadcast("add", a, b, |x, y| x + y)?;
        self.push("add", v, Op::Add(a.0, b.0), &[a.0, b.0])
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = self.binary_broadcast("sub", a, b, |x, y| x - y)?;
        self.push("sub", v, Op::Sub(a.0, b.0), &[a.0, b.0])
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = self.binary_broadcast("mul", a, b, |x, y| x * y)?;
        self.push("mul", v, Op::Mul(a.0, b.0), &[a.0, b.0])
    }

    pub fn add_scalar(&self, a: Var, s: T) -> Result<Var, AutodiffError> {
        let v = self.value(a).map(|x| x + s);
        self.push("add_scalar", v, Op::AddScalar(a.0), &[a.0])
    }

    pub fn mul_scalar(&self, a: Var, s: T) -> Result<Var, AutodiffError> {
        let v = self.value(a).map(|x| x * s);
        self.push("mul_scalar", v, Op::MulScalar(a.0, s), &[a.0])
    }

    /// `[.., k] x [k, n] -> [.., n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = {
            let nodes = self.nodes.borrow();
            let (x, w) = (&nodes[a.0].value, &nodes[b.0].value);
            let k = *x.shape().last().unwrap();
            if w.rank() != 2 || w.shape()[0] != k {
                return Err(AutodiffError::shape(
                    "matmul",
                    format!("{:?} x {:?}", x.shape(), w.shape()),
                ));
            }
            let n = w.shape()[1];
            let m = x.len() / k;
            let mut out = vec![T::zero(); m * n];
            T::gemm(
                m,
                k,
                n,
                T::one(),
                x.data(),
                k as isize,
                1,
                w.data(),
                n as isize,
                1,
                T::zero(),
                &mut out,
                n as isize,
                1,
            );
            let mut shape = x.shape().to_vec();
            *shape.last_mut().unwrap() = n;
            Tensor::new(shape, out)?
        };
        self.push("matmul", v, Op::MatMul(a.0, b.0), &[a.0, b.0])
    }

    /// Batched product over matching leading axes: `[.., m, k] x [.., k, n]`.
    pub fn batch_matmul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            let (xs, ys) = (x.shape(), y.shape());
            let r = xs.len();
            if r < 2 || ys.len() != r || xs[..r - 2] != ys[..r - 2] || xs[r - 1] != ys[r - 2] {
                return Err(AutodiffError::shape(
                    "batch_matmul",
                    format!("{xs:?} x {ys:?}"),
                ));
            }
            let (m, k, n) = (xs[r - 2], xs[r - 1], ys[r - 1]);
            let batch: usize = xs[..r - 2].iter().product();
            let mut out = vec![T::zero(); batch * m * n];
            for bi in 0..batch {
                T::gemm(
                    m,
                    k,
                    n,
                    T::one(),
                    &x.data()[bi * m * k..],
                    k as isize,
                    1,
                    &y.data()[bi * k * n..],
                    n as isize,
                    1,
                    T::zero(),
                    &mut out[bi * m * n..],
                    n as isize,
                    1,
                );
            }
            let mut shape = xs.to_vec();
            shape[r - 1] = n;
            Tensor::new(shape, out)?
        };
        self.push("batch_matmul", v, Op::BatchMatMul(a.0, b.0), &[a.0, b.0])
    }

    pub fn permute(&self, a: Var, axes: &[usize]) -> Result<Var, AutodiffError> {
        let v = {
            let x = self.value(a);
            let mut seen = vec![false; x.rank()];
            if axes.len() != x.rank()
                || axes
                    .iter()
                    .any(|&ax| ax >= x.rank() || std::mem::replace(&mut seen[ax], true))
            {
                return Err(AutodiffError::shape(
                    "permute",
                    format!("{:?} by {axes:?}", x.shape()),
                ));
            }
            permute_tensor(&x, axes)
        };
        self.push("permute", v, Op::Permute(a.0, axes.to_vec()), &[a.0])
    }

    /// Swaps the last two axes.
    pub fn transpose(&self, a: Var) -> Result<Var, AutodiffError> {
        let r = self.value(a).rank();
        if r < 2 {
            return Err(AutodiffError::shape("transpose", format!("rank {r}")));
        }
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 2, r - 1);
        self.permute(a, &axes)
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let v = self.value(a).clone().reshaped(shape)?;
        self.push("reshape", v, Op::Reshape(a.0), &[a.0])
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        let v = {
            let nodes = self.nodes.borrow();
            let first = nodes[parts
                .first()
                .ok_or_else(|| AutodiffError::shape("concat", "no inputs".into()))?
                .0]
                .value
                .shape()
                .to_vec();
            if axis >= first.len() {
                return Err(AutodiffError::shape(
                    "concat",
                    format!("axis {axis} of {first:?}"),
                ));
            }
            let mut total = 0;
            for p in parts {
                let s = nodes[p.0].value.shape();
                if s.len() != first.len()
                    || s.iter()
                        .zip(&first)
                        .enumerate()
                        .any(|(i, (x, y))| i != axis && x != y)
                {
                    return Err(AutodiffError::shape(
                        "concat",
                        format!("{first:?} vs {s:?}"),
                    ));
                }
                total += s[axis];
            }
            let (outer, _, inner) = axis_extents(&first, axis);
            let mut out = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for p in parts {
                    let t = &nodes[p.0].value;
                    let block = t.shape()[axis] * inner;
                    out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
                }
            }
            let mut shape = first;
            shape[axis] = total;
            Tensor::new(shape, out)?
        };
        let idx: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push("concat", v, Op::Concat(idx.clone(), axis), &idx)
    }

    /// Takes `len` entries along `axis` starting at `start`.
    pub fn slice(
        &self,
        a: Var,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<Var, AutodiffError> {
        let v = {
            let x = self.value(a);
            if axis >= x.rank() || len == 0 || start + len > x.shape()[axis] {
                return Err(AutodiffError::shape(
                    "slice",
                    format!("{:?} axis {axis} [{start}, {})", x.shape(), start + len),
                ));
            }
            let (outer, dim, inner) = axis_extents(x.shape(), axis);
            let mut out = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * dim + start) * inner;
                out.extend_from_slice(&x.data()[base..base + len * inner]);
            }
            let mut shape = x.shape().to_vec();
            shape[axis] = len;
            Tensor::new(shape, out)?
        };
        self.push("slice", v, Op::Slice(a.0, axis, start), &[a.0])
    }

    fn reduce_axis(
        &self,
        a: Var,
        axis: usize,
        name: &'static str,
        mean: bool,
    ) -> Result<Tensor<T>, AutodiffError> {
        let x = self.value(a);
        if axis >= x.rank() {
            return Err(AutodiffError::shape(
                name,
                format!("axis {axis} of {:?}", x.shape()),
            ));
        }
        let (outer, dim, inner) = axis_extents(x.shape(), axis);
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for d in 0..dim {
                let row = &x.data()[(o * dim + d) * inner..(o * dim + d + 1) * inner];
                for (acc, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        if mean {
            let s = T::one() / T::of(dim as f64);
            out.iter_mut().for_each(|v| *v *= s);
        }
        let mut shape: Vec<usize> = x.shape().to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Tensor::new(shape, out)
    }

    /// Sum over one axis (the axis is removed).
    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let v = self.reduce_axis(a, axis, "sum_axis", false)?;
        self.push("sum_axis", v, Op::Sum(a.0, axis), &[a.0])
    }

    pub fn mean_axis(&self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let v = self.reduce_axis(a, axis, "mean_axis", true)?;
        self.push("mean_axis", v, Op::Mean(a.0, axis), &[a.0])
    }

    /// Sum of every element, as a one-element tensor.
    pub fn sum(&self, a: Var) -> Result<Var, AutodiffError> {
        let v = Tensor::scalar(self.value(a).data().iter().copied().sum());
        self.push("sum", v, Op::SumAll(a.0), &[a.0])
    }

    fn unary(
        &self,
        a: Var,
        name: &'static str,
        f: impl Fn(T) -> T,
        op: Op<T>,
    ) -> Result<Var, AutodiffError> {
        let v = self.value(a).map(f);
        self.push(name, v, op, &[a.0])
    }

    pub fn tanh(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, "tanh", |x| x.tanh(), Op::Tanh(a.0))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, "sigmoid", sigmoid, Op::Sigmoid(a.0))
    }

    pub fn relu(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, "relu", |x| x.max(T::zero()), Op::Relu(a.0))
    }

    pub fn exp(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, "exp", |x| x.exp(), Op::Exp(a.0))
    }

    pub fn log(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, "log", |x| x.ln(), Op::Log(a.0))
    }

    pub fn softmax(&self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let v = {
            let x = self.value(a);
            if axis >= x.rank() {
                return Err(AutodiffError::shape(
                    "softmax",
                    format!("axis {axis} of {:?}", x.shape()),
                ));
            }
            let (outer, dim, inner) = axis_extents(x.shape(), axis);
            let mut out = x.clone();
            let d = out.data_mut();
            for o in 0..outer {
                for i in 0..inner {
                    let at = |k: usize| (o * dim + k) * inner + i;
                    let mx = (0..dim).map(|k| d[at(k)]).fold(T::neg_infinity(), T::max);
                    let mut z = T::zero();
                    for k in 0..dim {
                        let e = (d[at(k)] - mx).exp();
                        d[at(k)] = e;
                        z += e;
                    }
                    for k in 0..dim {
                        d[at(k)] /= z;
                    }
                }
            }
            out
        };
        self.push("softmax", v, Op::Softmax(a.0, axis), &[a.0])
    }

    /// Normalizes over the last axis to zero mean and unit variance.
    pub fn layer_norm(&self, a: Var, eps: T) -> Result<Var, AutodiffError> {
        let (v, rstd) = {
            let x = self.value(a);
            let d = *x.shape().last().unwrap();
            let rows = x.len() / d;
            let inv_d = T::one() / T::of(d as f64);
            let mut out = x.clone();
            let mut rstd = Vec::with_capacity(rows);
            for row in out.data_mut().chunks_mut(d) {
                let mean = row.iter().copied().sum::<T>() * inv_d;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
                let r = T::one() / (var + eps).sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) * r);
                rstd.push(r);
            }
            (out, rstd)
        };
        self.push("layer_norm", v, Op::LayerNorm(a.0, rstd), &[a.0])
    }

    /// Inverted dropout with an explicit keep mask (`true` keeps).
    pub fn dropout(&self, a: Var, keep: &[bool], rate: T) -> Result<Var, AutodiffError> {
        if rate < T::zero() || rate >= T::one() {
            return Err(AutodiffError::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        let scale_keep = T::one() / (T::one() - rate);
        let scale: Vec<T> = keep
            .iter()
            .map(|&k| if k { scale_keep } else { T::zero() })
            .collect();
        let v = {
            let x = self.value(a);
            if x.len() != keep.len() {
                return Err(AutodiffError::shape(
                    "dropout",
                    format!("mask {} vs {:?}", keep.len(), x.shape()),
                ));
            }
            let data = x.data().iter().zip(&scale).map(|(&v, &s)| v * s).collect();
            Tensor::new(x.shape().to_vec(), data)?
        };
        self.push("dropout", v, Op::Dropout(a.0, scale), &[a.0])
    }

    /// Mean squared error between two equally shaped tensors.
    pub fn mse_loss(&self, pred: Var, target: Var) -> Result<Var, AutodiffError> {
        let v = {
            let nodes = self.nodes.borrow();
            let (p, t) = (&nodes[pred.0].value, &nodes[target.0].value);
            if p.shape() != t.shape() {
                return Err(AutodiffError::shape(
                    "mse_loss",
                    format!("{:?} vs {:?}", p.shape(), t.shape()),
                ));
            }
            let s: T = p
                .data()
                .iter()
                .zip(t.data())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            Tensor::scalar(s / T::of(p.len() as f64))
        };
        self.push(
            "mse_loss",
            v,
            Op::Mse(pred.0, target.0),
            &[pred.0, target.0],
        )
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, AutodiffError> {
        let nodes = self.nodes.borrow();
        if nodes[loss.0].value.len() != 1 {
            return Err(AutodiffError::shape(
                "backward",
                format!("loss shape {:?}", nodes[loss.0].value.shape()),
            ));
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(nodes[loss.0].value.shape()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !g.all_finite() {
                return Err(AutodiffError::NonFiniteGradient { node: i });
            }
            let node = &nodes[i];
            if node.requires_grad {
                for (p, contrib) in local_grads(&nodes, node, &g)? {
                    if !nodes[p].requires_grad {
                        continue;
                    }
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&contrib),
                        slot => *slot = Some(contrib),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn permute_tensor<T: Scalar>(x: &Tensor<T>, axes: &[usize]) -> Tensor<T> {
    let in_strides = strides(x.shape());
    let out_shape: Vec<usize> = axes.iter().map(|&a| x.shape()[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; out_shape.len()];
    let mut offset = 0usize;
    for _ in 0..n {
        out.push(x.data()[offset]);
        for ax in (0..idx.len()).rev() {
            idx[ax] += 1;
            offset += src_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= src_strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    Tensor::new(out_shape, out).expect("permutation preserves size")
}

/// Sums `g` over the leading axes so it matches a broadcast suffix of size `m`.
fn reduce_to_suffix<T: Scalar>(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    let m: usize = shape.iter().product();
    let mut out = vec![T::zero(); m];
    for chunk in g.data().chunks(m) {
        for (o, &v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    Tensor::new(shape.to_vec(), out).expect("suffix shape")
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Multiplies `g` by the broadcast `y` (suffix of g's shape).
fn mul_broadcast<T: Scalar>(g: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let m = y.len();
    let data = g
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * y.data()[i % m])
        .collect();
    Tensor::new(g.shape().to_vec(), data).expect("same shape")
}

fn local_grads<T: Scalar>(
    nodes: &[Node<T>],
    node: &Node<T>,
    g: &Tensor<T>,
) -> Result<Vec<(usize, Tensor<T>)>, AutodiffError> {
    let val = |i: usize| &nodes[i].value;
    let needs = |i: usize| nodes[i].requires_grad;
    let out = &node.value;
    Ok(match &node.op {
        Op::Leaf => vec![],
        Op::Add(a, b) => {
            let mut v = vec![(*a, g.clone())];
            if needs(*b) {
                v.push((*b, reduce_to_suffix(g, val(*b).shape())));
            }
            v
        }
        Op::Sub(a, b) => {
            let mut v = vec![(*a, g.clone())];
            if needs(*b) {
                v.push((*b, reduce_to_suffix(&g.map(|x| -x), val(*b).shape())));
            }
            v
        }
        Op::Mul(a, b) => {
            let mut v = Vec::with_capacity(2);
            if needs(*a) {
                v.push((*a, mul_broadcast(g, val(*b))));
            }
            if needs(*b) {
                let prod = zip_map(g, val(*a), |x, y| x * y);
                v.push((*b, reduce_to_suffix(&prod, val(*b).shape())));
            }
            v
        }
        Op::AddScalar(a) => vec![(*a, g.clone())],
        Op::MulScalar(a, s) => vec![(*a, g.map(|x| x * *s))],
        Op::MatMul(a, b) => {
            let (x, w) = (val(*a), val(*b));
            let (k, n) = (w.shape()[0], w.shape()[1]);
            let m = x.len() / k;
            let mut v = Vec::with_capacity(2);
            if needs(*a) {
                let mut dx = vec![T::zero(); m * k];
                T::gemm(
                    m,
                    n,
                    k,
                    T::one(),
                    g.data(),
                    n as isize,
                    1,
                    w.data(),
                    1,
                    n as isize,
                    T::zero(),
                    &mut dx,
                    k as isize,
                    1,
                );
                v.push((*a, Tensor::new(x.shape().to_vec(), dx)?));
            }
            if needs(*b) {
                let mut dw = vec![T::zero(); k * n];
                T::gemm(
                    k,
                    m,
                    n,
                    T::one(),
                    x.data(),
                    1,
                    k as isize,
                    g.data(),
                    n as isize,
                    1,
                    T::zero(),
                    &mut dw,
                    n as isize,
                    1,
                );
                v.push((*b, Tensor::new(vec![k, n], dw)?));
            }
            v
        }
        Op::BatchMatMul(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let r = x.rank();
            let (m, k, n) = (x.shape()[r - 2], x.shape()[r - 1], y.shape()[r - 1]);
            let batch = x.len() / (m * k);
            let mut v = Vec::with_capacity(2);
            if needs(*a) {
                let mut dx = vec![T::zero(); x.len()];
                for bi in 0..batch {
                    T::gemm(
                        m,
                        n,
                        k,
                        T::one(),
                        &g.data()[bi * m * n..],
                        n as isize,
                        1,
                        &y.data()[bi * k * n..],
                        1,
                        n as isize,
                        T::zero(),
                        &mut dx[bi * m * k..],
                        k as isize,
                        1,
                    );
                }
                v.push((*a, Tensor::new(x.shape().to_vec(), dx)?));
            }
            if needs(*b) {
                let mut dy = vec![T::zero(); y.len()];
                for bi in 0..batch {
                    T::gemm(
                        k,
                        m,
                        n,
                        T::one(),
                        &x.data()[bi * m * k..],
                        1,
                        k as isize,
                        &g.data()[bi * m * n..],
                        n as isize,
                        1,
                        T::zero(),
                        &mut dy[bi * k * n..],
                        n as isize,
                        1,
                    );
                }
                v.push((*b, Tensor::new(y.shape().to_vec(), dy)?));
            }
            v
        }
        Op::Permute(a, axes) => {
            let mut inverse = vec![0; axes.len()];
            for (i, &ax) in axes.iter().enumerate() {
                inverse[ax] = i;
            }
            vec![(*a, permute_tensor(g, &inverse))]
        }
        Op::Reshape(a) => vec![(*a, g.clone().reshaped(val(*a).shape())?)],
        Op::Concat(parts, axis) => {
            let (outer, total, inner) = axis_extents(g.shape(), *axis);
            let mut offset = 0;
            let mut v = Vec::with_capacity(parts.len());
            for &p in parts {
                let dim = val(p).shape()[*axis];
                if needs(p) {
                    let mut d = Vec::with_capacity(outer * dim * inner);
                    for o in 0..outer {
                        let base = (o * total + offset) * inner;
                        d.extend_from_slice(&g.data()[base..base + dim * inner]);
                    }
                    v.push((p, Tensor::new(val(p).shape().to_vec(), d)?));
                }
                offset += dim;
            }
            v
        }
        Op::Slice(a, axis, start) => {
            let x = val(*a);
            let (outer, dim, inner) = axis_extents(x.shape(), *axis);
            let len = g.shape()[*axis];
            let mut d = vec![T::zero(); x.len()];
            for o in 0..outer {
                let dst = (o * dim + start) * inner;
                d[dst..dst + len * inner]
                    .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
            }
            vec![(*a, Tensor::new(x.shape().to_vec(), d)?)]
        }
        Op::Sum(a, axis) | Op::Mean(a, axis) => {
            let x = val(*a);
            let (outer, dim, inner) = axis_extents(x.shape(), *axis);
            let s = if matches!(node.op, Op::Mean(..)) {
                T::one() / T::of(dim as f64)
            } else {
                T::one()
            };
            let mut d = Vec::with_capacity(x.len());
            for o in 0..outer {
                for _ in 0..dim {
                    d.extend(g.data()[o * inner..(o + 1) * inner].iter().map(|&v| v * s));
                }
            }
            vec![(*a, Tensor::new(x.shape().to_vec(), d)?)]
        }
        Op::SumAll(a) => vec![(*a, Tensor::full(val(*a).shape(), g.item()))],
        Op::Tanh(a) => vec![(*a, zip_map(g, out, |gv, y| gv * (T::one() - y * y)))],
        Op::Sigmoid(a) => vec![(*a, zip_map(g, out, |gv, y| gv * y * (T::one() - y)))],
        Op::Relu(a) => vec![(
            *a,
            zip_map(
                g,
                val(*a),
                |gv, x| if x > T::zero() { gv } else { T::zero() },
            ),
        )],
        Op::Exp(a) => vec![(*a, zip_map(g, out, |gv, y| gv * y))],
        Op::Log(a) => vec![(*a, zip_map(g, val(*a), |gv, x| gv / x))],
        Op::Softmax(a, axis) => {
            let (outer, dim, inner) = axis_extents(out.shape(), *axis);
            let mut d = vec![T::zero(); out.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |k: usize| (o * dim + k) * inner + i;
                    let dot: T = (0..dim).map(|k| g.data()[at(k)] * out.data()[at(k)]).sum();
                    for k in 0..dim {
                        d[at(k)] = out.data()[at(k)] * (g.data()[at(k)] - dot);
                    }
                }
            }
            vec![(*a, Tensor::new(out.shape().to_vec(), d)?)]
        }
        Op::LayerNorm(a, rstd) => {
            let dim = *out.shape().last().unwrap();
            let inv_d = T::one() / T::of(dim as f64);
            let mut d = Vec::with_capacity(out.len());
            for ((gy, y), &r) in g.data().chunks(dim).zip(out.data().chunks(dim)).zip(rstd) {
                let mean_g = gy.iter().copied().sum::<T>() * inv_d;
                let mean_gy = gy.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>() * inv_d;
                d.extend(
                    gy.iter()
                        .zip(y)
                        .map(|(&gv, &yv)| r * (gv - mean_g - yv * mean_gy)),
                );
            }
            vec![(*a, Tensor::new(out.shape().to_vec(), d)?)]
        }
        Op::Dropout(a, scale) => {
            let data = g.data().iter().zip(scale).map(|(&gv, &s)| gv * s).collect();
            vec![(*a, Tensor::new(g.shape().to_vec(), data)?)]
        }
        Op::Mse(p, t) => {
            let (pv, tv) = (val(*p), val(*t));
            let k = T::of(2.0) * g.item() / T::of(pv.len() as f64);
            let dp = zip_map(pv, tv, |x, y| k * (x - y));
            let mut v = Vec::with_capacity(2);
            if needs(*t) {
                v.push((*t, dp.map(|x| -x)));
            }
            v.push((*p, dp));
            v
        }
    })
}
