//! Forward ops on [`Var`] and their backward rules.

use super::kernels::{self, ConvDims};
use super::{Node, Op, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Padding for stride-1 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output length `T - width + 1`.
    Valid,
    /// Output length `T`; the extra tap of even widths goes on the right.
    Same,
}

/// Per-channel batch statistics from a training-mode batch norm.
#[derive(Clone, Debug)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance, as used for running estimates.
    pub var: Vec<f64>,
}

fn nonempty(op: &'static str, t: &Tensor<impl Scalar>) -> Result<()> {
    if t.is_empty() {
        Err(Error::EmptyTensor { op })
    } else {
        Ok(())
    }
}

/// `(outer, axis_len, inner)` for a reduction or split along `axis`.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<'t, T: Scalar> Var<'t, T> {
    fn same_tape(&self, other: &Var<'t, T>) {
        debug_assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars from different tapes"
        );
    }

    fn binary(
        self,
        other: Var<'t, T>,
        name: &'static str,
        f: impl Fn(T, T) -> T,
        op: fn(usize, usize) -> Op<T>,
    ) -> Result<Var<'t, T>> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        nonempty(name, &a)?;
        nonempty(name, &b)?;
        let out = if a.shape() == b.shape() {
            a.zip_map(&b, f)
        } else if b.len() == 1 {
            let s = b.data()[0];
            a.map(|x| f(x, s))
        } else if a.len() == 1 {
            let s = a.data()[0];
            b.map(|y| f(s, y))
        } else {
            return Err(Error::shape(name, a.shape(), b.shape()));
        };
        Ok(self.tape.push(out, op(self.id, other.id)))
    }

    /// Elementwise sum; one side may be a one-element tensor.
    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "add", |a, b| a + b, Op::Add)
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub)
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul)
    }

    pub fn scale(self, c: f64) -> Var<'t, T> {
        let c = T::lit(c);
        let out = self.value().map(|x| x * c);
        self.tape.push(out, Op::Scale(self.id, c))
    }

    /// Elementwise product with a constant of the same shape (dropout masks).
    pub fn mul_const(self, mask: Tensor<T>) -> Result<Var<'t, T>> {
        let a = self.value();
        if a.shape() != mask.shape() {
            return Err(Error::shape("mul_const", a.shape(), mask.shape()));
        }
        let out = a.zip_map(&mask, |x, m| x * m);
        Ok(self.tape.push(out, Op::MulConst(self.id, mask)))
    }

    /// `[m, k] · [k, n] -> [m, n]`
    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        nonempty("matmul", &a)?;
        nonempty("matmul", &b)?;
        if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::shape("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let out = Tensor::new(vec![m, n], kernels::matmul(a.data(), b.data(), m, k, n))?;
        Ok(self.tape.push(out, Op::MatMul(self.id, other.id)))
    }

    /// `[m, n] · [n] -> [m]`, with `self` the matrix.
    pub fn matvec(self, x: Var<'t, T>) -> Result<Var<'t, T>> {
        self.same_tape(&x);
        let (w, v) = (self.value(), x.value());
        nonempty("matvec", &w)?;
        nonempty("matvec", &v)?;
        if w.shape().len() != 2 || v.shape().len() != 1 || w.shape()[1] != v.shape()[0] {
            return Err(Error::shape("matvec", w.shape(), v.shape()));
        }
        let n = w.shape()[1];
        let out: Vec<T> = w
            .data()
            .chunks(n)
            .map(|row| kernels::dot(row, v.data()))
            .collect();
        Ok(self
            .tape
            .push(Tensor::from_vec(out), Op::MatVec(self.id, x.id)))
    }

    fn unary(self, name: &'static str, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var<'t, T>> {
        let a = self.value();
        nonempty(name, &a)?;
        Ok(self.tape.push(a.map(f), op))
    }

    pub fn tanh(self) -> Result<Var<'t, T>> {
        self.unary("tanh", |x| x.tanh(), Op::Tanh(self.id))
    }

    /// Logistic sigmoid, evaluated so that neither tail overflows.
    pub fn sigmoid(self) -> Result<Var<'t, T>> {
        self.unary("sigmoid", sigmoid, Op::Sigmoid(self.id))
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Var<'t, T>> {
        let s = T::lit(slope);
        self.unary(
            "leaky_relu",
            move |x| if x > T::zero() { x } else { x * s },
            Op::LeakyRelu(self.id, s),
        )
    }

    pub fn abs(self) -> Result<Var<'t, T>> {
        self.unary("abs", |x| x.abs(), Op::Abs(self.id))
    }

    /// Softmax along the last axis, with max subtraction.
    pub fn softmax(self) -> Result<Var<'t, T>> {
        let a = self.value();
        nonempty("softmax", &a)?;
        let n = *a.shape().last().unwrap();
        let mut out = a.as_ref().clone();
        out.data_mut().chunks_mut(n).for_each(softmax_in_place);
        Ok(self.tape.push(out, Op::Softmax(self.id)))
    }

    pub fn concat(vars: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>> {
        let first = vars.first().ok_or(Error::EmptyTensor { op: "concat" })?;
        let values: Vec<_> = vars.iter().map(|v| v.value()).collect();
        let base = values[0].shape().to_vec();
        if axis >= base.len() {
            return Err(invalid!(
                "concat: axis {axis} out of range for shape {base:?}"
            ));
        }
        let mut total = 0;
        for v in &values {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in &values {
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let out = Tensor::new(shape, data)?;
        let inputs = vars.iter().map(|v| v.id).collect();
        Ok(first.tape.push(out, Op::Concat { inputs, axis }))
    }

    /// Elements `[start, start + len)` along `axis`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        let s = a.shape();
        if axis >= s.len() || start + len > s[axis] || len == 0 {
            return Err(invalid!(
                "slice: range {start}..{} on axis {axis} outside shape {s:?}",
                start + len
            ));
        }
        let (outer, n, inner) = axis_split(s, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner;
            data.extend_from_slice(&a.data()[base + start * inner..base + (start + len) * inner]);
        }
        let mut shape = s.to_vec();
        shape[axis] = len;
        let out = Tensor::new(shape, data)?;
        Ok(self.tape.push(
            out,
            Op::Slice {
                input: self.id,
                axis,
                start,
            },
        ))
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Var<'t, T>> {
        let out = self.value().as_ref().clone().reshape(shape)?;
        Ok(self.tape.push(out, Op::Reshape(self.id)))
    }

    pub fn transpose(self) -> Result<Var<'t, T>> {
        let a = self.value();
        let s = a.shape();
        if s.len() != 2 {
            return Err(invalid!("transpose: expected a matrix, got shape {s:?}"));
        }
        let out = Tensor::new(vec![s[1], s[0]], kernels::transpose(a.data(), s[0], s[1]))?;
        Ok(self.tape.push(out, Op::Transpose(self.id)))
    }

    fn reduce_axis(self, axis: usize, mean: bool) -> Result<Var<'t, T>> {
        let a = self.value();
        nonempty("reduce", &a)?;
        let s = a.shape();
        if axis >= s.len() {
            return Err(invalid!("reduce: axis {axis} out of range for shape {s:?}"));
        }
        let (outer, n, inner) = axis_split(s, axis);
        let norm = if mean {
            T::lit(1.0 / n as f64)
        } else {
            T::one()
        };
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let src = &a.data()[(o * n + k) * inner..(o * n + k + 1) * inner];
                kernels::axpy(T::one(), src, &mut data[o * inner..(o + 1) * inner]);
            }
        }
        data.iter_mut().for_each(|v| *v = *v * norm);
        let mut shape: Vec<usize> = s.to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        let out = Tensor::new(shape, data)?;
        Ok(self.tape.push(
            out,
            Op::SumAxis {
                input: self.id,
                axis,
                mean,
            },
        ))
    }

    pub fn sum_axis(self, axis: usize) -> Result<Var<'t, T>> {
        self.reduce_axis(axis, false)
    }

    pub fn mean_axis(self, axis: usize) -> Result<Var<'t, T>> {
        self.reduce_axis(axis, true)
    }

    /// Sum of all elements as a one-element tensor.
    pub fn sum(self) -> Result<Var<'t, T>> {
        let n = self.value().len();
        self.reshape(vec![n])?.sum_axis(0)
    }

    /// Non-overlapping max pooling along the last axis; a trailing partial
    /// window is dropped.
    pub fn max_pool(self, width: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        nonempty("max_pool", &a)?;
        let s = a.shape();
        let n = *s.last().unwrap();
        if width == 0 || width > n {
            return Err(invalid!("max_pool: width {width} invalid for length {n}"));
        }
        let out_n = n / width;
        let rows = a.len() / n;
        let mut data = Vec::with_capacity(rows * out_n);
        let mut argmax = Vec::with_capacity(rows * out_n);
        for r in 0..rows {
            for j in 0..out_n {
                let base = r * n + j * width;
                let mut best = base;
                for i in base + 1..base + width {
                    if a.data()[i] > a.data()[best] {
                        best = i;
                    }
                }
                data.push(a.data()[best]);
                argmax.push(best);
            }
        }
        let mut shape = s.to_vec();
        *shape.last_mut().unwrap() = out_n;
        let out = Tensor::new(shape, data)?;
        Ok(self.tape.push(
            out,
            Op::MaxPool {
                input: self.id,
                argmax,
            },
        ))
    }

    /// Stride-1 cross-correlation of `self: [in_ch, T]` with
    /// `weight: [out_ch, in_ch, width]`; kernels are not flipped.
    pub fn conv1d(
        self,
        weight: Var<'t, T>,
        bias: Option<Var<'t, T>>,
        padding: Padding,
    ) -> Result<Var<'t, T>> {
        let (x, w) = (self.value(), weight.value());
        nonempty("conv1d", &x)?;
        nonempty("conv1d", &w)?;
        let (xs, ws) = (x.shape(), w.shape());
        if xs.len() != 2 || ws.len() != 3 || xs[0] != ws[1] {
            return Err(Error::shape("conv1d", xs, ws));
        }
        let (in_ch, len, out_ch, width) = (xs[0], xs[1], ws[0], ws[2]);
        let (pad_left, pad_right) = match padding {
            Padding::Valid => (0, 0),
            Padding::Same => ((width - 1) / 2, width - 1 - (width - 1) / 2),
        };
        if len + pad_left + pad_right < width {
            return Err(invalid!(
                "conv1d: kernel width {width} exceeds input length {len}"
            ));
        }
        let dims = ConvDims {
            in_ch,
            out_ch,
            width,
            len,
            pad_left,
            out_len: len + pad_left + pad_right + 1 - width,
        };
        let b = match bias {
            Some(b) => {
                let bv = b.value();
                if bv.shape() != [out_ch] {
                    return Err(Error::shape("conv1d bias", bv.shape(), &[out_ch]));
                }
                Some(bv)
            }
            None => None,
        };
        let y = kernels::conv1d(x.data(), w.data(), b.as_ref().map(|b| b.data()), dims);
        let out = Tensor::new(vec![out_ch, dims.out_len], y)?;
        Ok(self.tape.push(
            out,
            Op::Conv1d {
                input: self.id,
                weight: weight.id,
                bias: bias.map(|b| b.id),
                dims,
            },
        ))
    }

    /// Training-mode batch norm of `self: [C, N]` over axis 1.
    pub fn batch_norm(
        self,
        gamma: Var<'t, T>,
        beta: Var<'t, T>,
        eps: f64,
    ) -> Result<(Var<'t, T>, BatchStats)> {
        let x = self.value();
        nonempty("batch_norm", &x)?;
        let s = x.shape();
        if s.len() != 2 {
            return Err(invalid!("batch_norm: expected [channels, n], got {s:?}"));
        }
        let (c, n) = (s[0], s[1]);
        let (g, b) = (gamma.value(), beta.value());
        if g.shape() != [c] || b.shape() != [c] {
            return Err(Error::shape("batch_norm", s, g.shape()));
        }
        let mut xhat = vec![T::zero(); c * n];
        let mut y = vec![T::zero(); c * n];
        let mut inv_std = vec![T::zero(); c];
        let mut stats = BatchStats {
            mean: Vec::with_capacity(c),
            var: Vec::with_capacity(c),
        };
        let nf = T::lit(n as f64);
        for ch in 0..c {
            let row = &x.data()[ch * n..(ch + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nf;
            let ss: T = row.iter().map(|&v| (v - mean) * (v - mean)).sum();
            let var = ss / nf;
            let is = T::one() / (var + T::lit(eps)).sqrt();
            inv_std[ch] = is;
            for i in 0..n {
                let h = (row[i] - mean) * is;
                xhat[ch * n + i] = h;
                y[ch * n + i] = g.data()[ch] * h + b.data()[ch];
            }
            stats.mean.push(mean.as_f64());
            stats.var.push(if n > 1 {
                ss.as_f64() / (n - 1) as f64
            } else {
                0.0
            });
        }
        let out = Tensor::new(vec![c, n], y)?;
        let v = self.tape.push(
            out,
            Op::BatchNorm {
                input: self.id,
                gamma: gamma.id,
                beta: beta.id,
                xhat,
                inv_std,
            },
        );
        Ok((v, stats))
    }

    /// `y[c, i] = scale[c] · x[c, i] + shift[c]` for `self: [C, N]`.
    pub fn channel_affine(self, scale: Var<'t, T>, shift: Var<'t, T>) -> Result<Var<'t, T>> {
        let x = self.value();
        let s = x.shape();
        if s.len() != 2 {
            return Err(invalid!(
                "channel_affine: expected [channels, n], got {s:?}"
            ));
        }
        let (c, n) = (s[0], s[1]);
        let (a, b) = (scale.value(), shift.value());
        if a.shape() != [c] || b.shape() != [c] {
            return Err(Error::shape("channel_affine", s, a.shape()));
        }
        let mut y = x.as_ref().clone();
        for ch in 0..c {
            for v in &mut y.data_mut()[ch * n..(ch + 1) * n] {
                *v = a.data()[ch] * *v + b.data()[ch];
            }
        }
        Ok(self.tape.push(
            y,
            Op::ChannelAffine {
                input: self.id,
                scale: scale.id,
                shift: shift.id,
            },
        ))
    }

    /// `-log softmax(self)[label]` for a logit vector `self: [C]`.
    pub fn cross_entropy(self, label: usize) -> Result<Var<'t, T>> {
        let z = self.value();
        let s = z.shape();
        if s.len() != 1 || s[0] < 2 {
            return Err(invalid!("cross_entropy: expected logits [C>=2], got {s:?}"));
        }
        if label >= s[0] {
            return Err(invalid!(
                "cross_entropy: label {label} out of range for {} classes",
                s[0]
            ));
        }
        let mut probs = z.data().to_vec();
        softmax_in_place(&mut probs);
        let max = z.data().iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + z.data().iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let loss = lse - z.data()[label];
        Ok(self.tape.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: self.id,
                label,
                probs,
            },
        ))
    }

    /// Row gather from `self: [V, D]`; `None` rows are zero vectors.
    pub fn gather_rows(self, rows: &[Option<usize>]) -> Result<Var<'t, T>> {
        let t = self.value();
        let s = t.shape();
        if s.len() != 2 {
            return Err(invalid!("gather_rows: expected a matrix, got {s:?}"));
        }
        let (v, d) = (s[0], s[1]);
        let mut data = vec![T::zero(); rows.len() * d];
        for (i, r) in rows.iter().enumerate() {
            if let Some(r) = *r {
                if r >= v {
                    return Err(invalid!("gather_rows: row {r} out of range for {v} rows"));
                }
                data[i * d..(i + 1) * d].copy_from_slice(&t.data()[r * d..(r + 1) * d]);
            }
        }
        let out = Tensor::new(vec![rows.len(), d], data)?;
        Ok(self.tape.push(
            out,
            Op::Gather {
                table: self.id,
                rows: rows.to_vec(),
            },
        ))
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
}

/// Gradient for a broadcast operand: reduce to one element when the operand
/// was a scalar.
fn unbroadcast<T: Scalar>(g: Tensor<T>, target: &Tensor<T>) -> Tensor<T> {
    if g.shape() == target.shape() {
        g
    } else {
        Tensor::new(target.shape().to_vec(), vec![g.sum()]).expect("scalar operand")
    }
}

fn broadcast_get<T: Scalar>(t: &Tensor<T>, i: usize) -> T {
    if t.len() == 1 {
        t.data()[0]
    } else {
        t.data()[i]
    }
}

impl<T: Scalar> Op<T> {
    pub(crate) fn inputs(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) | MatVec(a, b) => vec![*a, *b],
            Scale(a, _)
            | MulConst(a, _)
            | Tanh(a)
            | Sigmoid(a)
            | LeakyRelu(a, _)
            | Abs(a)
            | Softmax(a)
            | Reshape(a)
            | Transpose(a) => vec![*a],
            Concat { inputs, .. } | Custom { inputs, .. } => inputs.clone(),
            Slice { input, .. } | SumAxis { input, .. } | MaxPool { input, .. } => vec![*input],
            Conv1d {
                input,
                weight,
                bias,
                ..
            } => {
                let mut v = vec![*input, *weight];
                v.extend(bias);
                v
            }
            BatchNorm {
                input, gamma, beta, ..
            } => vec![*input, *gamma, *beta],
            ChannelAffine {
                input,
                scale,
                shift,
            } => vec![*input, *scale, *shift],
            CrossEntropy { logits, .. } => vec![*logits],
            Gather { table, .. } => vec![*table],
        }
    }

    /// Gradients for the inputs of this node given the output gradient `g`.
    pub(crate) fn backward(
        &self,
        g: &Tensor<T>,
        node: &Node<T>,
        nodes: &[Node<T>],
    ) -> Vec<(usize, Tensor<T>)> {
        let val = |i: usize| nodes[i].value.as_ref();
        let need = |i: usize| nodes[i].requires_grad;
        let y = node.value.as_ref();
        let mut out = Vec::new();
        match self {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(self, Op::Sub(..)) {
                    -T::one()
                } else {
                    T::one()
                };
                if need(*a) {
                    out.push((*a, unbroadcast(g.clone(), val(*a))));
                }
                if need(*b) {
                    out.push((*b, unbroadcast(g.map(|v| v * sign), val(*b))));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if need(*a) {
                    let ga = g.map_indexed(|i, gi| gi * broadcast_get(bv, i));
                    out.push((*a, unbroadcast(ga, av)));
                }
                if need(*b) {
                    let gb = g.map_indexed(|i, gi| gi * broadcast_get(av, i));
                    out.push((*b, unbroadcast(gb, bv)));
                }
            }
            Op::Scale(a, c) => out.push((*a, g.map(|v| v * *c))),
            Op::MulConst(a, m) => out.push((*a, g.zip_map(m, |v, m| v * m))),
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if need(*a) {
                    // g · bᵀ
                    let bt = kernels::transpose(bv.data(), k, n);
                    let ga = kernels::matmul(g.data(), &bt, m, n, k);
                    out.push((*a, Tensor::new(vec![m, k], ga).unwrap()));
                }
                if need(*b) {
                    // aᵀ · g
                    let at = kernels::transpose(av.data(), m, k);
                    let gb = kernels::matmul(&at, g.data(), k, m, n);
                    out.push((*b, Tensor::new(vec![k, n], gb).unwrap()));
                }
            }
            Op::MatVec(w, x) => {
                let (wv, xv) = (val(*w), val(*x));
                let (m, n) = (wv.shape()[0], wv.shape()[1]);
                if need(*w) {
                    let mut gw = vec![T::zero(); m * n];
                    for i in 0..m {
                        kernels::axpy(g.data()[i], xv.data(), &mut gw[i * n..(i + 1) * n]);
                    }
                    out.push((*w, Tensor::new(vec![m, n], gw).unwrap()));
                }
                if need(*x) {
                    let mut gx = vec![T::zero(); n];
                    for i in 0..m {
                        kernels::axpy(g.data()[i], &wv.data()[i * n..(i + 1) * n], &mut gx);
                    }
                    out.push((*x, Tensor::from_vec(gx)));
                }
            }
            Op::Tanh(a) => out.push((*a, g.zip_map(y, |gi, yi| gi * (T::one() - yi * yi)))),
            Op::Sigmoid(a) => out.push((*a, g.zip_map(y, |gi, yi| gi * yi * (T::one() - yi)))),
            Op::LeakyRelu(a, s) => {
                let x = val(*a);
                out.push((
                    *a,
                    g.zip_map(x, |gi, xi| if xi > T::zero() { gi } else { gi * *s }),
                ));
            }
            Op::Abs(a) => {
                let x = val(*a);
                out.push((*a, g.zip_map(x, |gi, xi| gi * xi.signum())));
            }
            Op::Softmax(a) => {
                let n = *y.shape().last().unwrap();
                let mut gx = g.clone();
                for (gr, yr) in gx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                    let dotp: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for (gi, &yi) in gr.iter_mut().zip(yr) {
                        *gi = yi * (*gi - dotp);
                    }
                }
                out.push((*a, gx));
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = axis_split(y.shape(), *axis);
                let mut offset = 0;
                for &i in inputs {
                    let s = val(i).shape();
                    let n = s[*axis];
                    if need(i) {
                        let mut data = Vec::with_capacity(outer * n * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            data.extend_from_slice(&g.data()[base..base + n * inner]);
                        }
                        out.push((i, Tensor::new(s.to_vec(), data).unwrap()));
                    }
                    offset += n;
                }
            }
            Op::Slice { input, axis, start } => {
                let x = val(*input);
                let (outer, n, inner) = axis_split(x.shape(), *axis);
                let len = y.shape()[*axis];
                let mut gx = Tensor::zeros(x.shape().to_vec());
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    let src = o * len * inner;
                    gx.data_mut()[dst..dst + len * inner]
                        .copy_from_slice(&g.data()[src..src + len * inner]);
                }
                out.push((*input, gx));
            }
            Op::Reshape(a) => {
                let gx = g.clone().reshape(val(*a).shape().to_vec()).unwrap();
                out.push((*a, gx));
            }
            Op::Transpose(a) => {
                let s = y.shape();
                let gx = kernels::transpose(g.data(), s[0], s[1]);
                out.push((*a, Tensor::new(vec![s[1], s[0]], gx).unwrap()));
            }
            Op::SumAxis { input, axis, mean } => {
                let x = val(*input);
                let (outer, n, inner) = axis_split(x.shape(), *axis);
                let norm = if *mean {
                    T::lit(1.0 / n as f64)
                } else {
                    T::one()
                };
                let mut gx = Tensor::zeros(x.shape().to_vec());
                for o in 0..outer {
                    for k in 0..n {
                        let dst = (o * n + k) * inner;
                        for i in 0..inner {
                            gx.data_mut()[dst + i] = g.data()[o * inner + i] * norm;
                        }
                    }
                }
                out.push((*input, gx));
            }
            Op::MaxPool { input, argmax } => {
                let mut gx = Tensor::zeros(val(*input).shape().to_vec());
                for (j, &src) in argmax.iter().enumerate() {
                    gx.data_mut()[src] = gx.data()[src] + g.data()[j];
                }
                out.push((*input, gx));
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
            } => {
                let (x, w) = (val(*input), val(*weight));
                if need(*input) {
                    let gx = kernels::conv1d_grad_input(g.data(), w.data(), *dims);
                    out.push((*input, Tensor::new(x.shape().to_vec(), gx).unwrap()));
                }
                if need(*weight) {
                    let gw = kernels::conv1d_grad_weight(g.data(), x.data(), *dims);
                    out.push((*weight, Tensor::new(w.shape().to_vec(), gw).unwrap()));
                }
                if let Some(b) = bias.filter(|&b| need(b)) {
                    let gb = g
                        .data()
                        .chunks(dims.out_len)
                        .map(|r| r.iter().copied().sum())
                        .collect();
                    out.push((b, Tensor::from_vec(gb)));
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let s = y.shape();
                let (c, n) = (s[0], s[1]);
                let gam = val(*gamma);
                let mut sum_g = vec![T::zero(); c];
                let mut sum_gx = vec![T::zero(); c];
                for ch in 0..c {
                    for i in 0..n {
                        let gi = g.data()[ch * n + i];
                        sum_g[ch] = sum_g[ch] + gi;
                        sum_gx[ch] = sum_gx[ch] + gi * xhat[ch * n + i];
                    }
                }
                if need(*input) {
                    let nf = T::lit(n as f64);
                    let mut gx = vec![T::zero(); c * n];
                    for ch in 0..c {
                        let k = gam.data()[ch] * inv_std[ch] / nf;
                        for i in 0..n {
                            let idx = ch * n + i;
                            gx[idx] = k * (nf * g.data()[idx] - sum_g[ch] - xhat[idx] * sum_gx[ch]);
                        }
                    }
                    out.push((*input, Tensor::new(vec![c, n], gx).unwrap()));
                }
                if need(*gamma) {
                    out.push((*gamma, Tensor::from_vec(sum_gx)));
                }
                if need(*beta) {
                    out.push((*beta, Tensor::from_vec(sum_g)));
                }
            }
            Op::ChannelAffine {
                input,
                scale,
                shift,
            } => {
                let x = val(*input);
                let a = val(*scale);
                let (c, n) = (x.shape()[0], x.shape()[1]);
                if need(*input) {
                    let gx = g.map_indexed(|i, gi| gi * a.data()[i / n]);
                    out.push((*input, gx));
                }
                if need(*scale) {
                    let ga = (0..c)
                        .map(|ch| {
                            kernels::dot(
                                &g.data()[ch * n..(ch + 1) * n],
                                &x.data()[ch * n..(ch + 1) * n],
                            )
                        })
                        .collect();
                    out.push((*scale, Tensor::from_vec(ga)));
                }
                if need(*shift) {
                    let gb = g
                        .data()
                        .chunks(n)
                        .map(|r| r.iter().copied().sum())
                        .collect();
                    out.push((*shift, Tensor::from_vec(gb)));
                }
            }
            Op::CrossEntropy {
                logits,
                label,
                probs,
            } => {
                let g0 = g.data()[0];
                let gz = probs
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let onehot = if i == *label { T::one() } else { T::zero() };
                        g0 * (p - onehot)
                    })
                    .collect();
                out.push((*logits, Tensor::from_vec(gz)));
            }
            Op::Gather { table, rows } => {
                let t = val(*table);
                let d = t.shape()[1];
                let mut gt = Tensor::zeros(t.shape().to_vec());
                for (i, r) in rows.iter().enumerate() {
                    if let Some(r) = *r {
                        let src = &g.data()[i * d..(i + 1) * d];
                        kernels::axpy(T::one(), src, &mut gt.data_mut()[r * d..(r + 1) * d]);
                    }
                }
                out.push((*table, gt));
            }
            Op::Custom { inputs, rule } => {
                let values: Vec<&Tensor<T>> = inputs.iter().map(|&i| val(i)).collect();
                for (&i, gi) in inputs.iter().zip(rule.backward(g, &values, y)) {
                    if let Some(gi) = gi {
                        out.push((i, gi));
                    }
                }
            }
        }
        out
    }
}

impl<T: Scalar> Tensor<T> {
    pub(crate) fn map_indexed(&self, f: impl Fn(usize, T) -> T) -> Tensor<T> {
        let data = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        Tensor::new(self.shape().to_vec(), data).unwrap()
    }
}

impl<T: Scalar> Tape<T> {
    /// Shorthand for a constant built from `f64` values.
    pub fn constant_f64(&self, shape: impl Into<Vec<usize>>, data: &[f64]) -> Result<Var<'_, T>> {
        Ok(self.constant(Tensor::from_f64(shape, data)?))
    }
}
