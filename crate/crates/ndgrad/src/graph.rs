//! Dynamic computation tape.
//!
//! A [`Graph`] is rebuilt for every forward pass. Each op appends a node
//! holding its output value and enough information to push gradients back
//! to its inputs. Nodes are appended in evaluation order, so walking the
//! tape backwards is a valid topological order for the reverse sweep.

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm_nt_acc, gemm_tn_acc};
use crate::{GradError, Scalar, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    Row,
    Scalar,
}

#[derive(Clone, Copy, Debug)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    Binary(Binary, usize, usize, Bcast),
    Scale(usize, T),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Square(usize),
    LogSoftmax(usize),
    Gather(usize, Vec<usize>),
    SelectRows(usize, Vec<usize>),
    Concat(Vec<usize>),
    SliceCols(usize, usize),
    Reshape(usize),
    Unfold1d { x: usize, length: usize, channels: usize, width: usize },
    Mean(usize),
    Sum(usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Result<Var, GradError> {
        if self.consumed {
            return Err(GradError::GraphConsumed);
        }
        if !value.is_finite() {
            return Err(GradError::NonFinite(format!("{op:?}")));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: usize) -> bool {
        self.nodes[v].requires_grad
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var, GradError> {
        self.push(value, Op::Constant, false)
    }

    /// Registers a trainable parameter as a leaf of this pass.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<Var, GradError> {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a.0) || self.rg(b.0);
        self.push(value, Op::MatMul(a.0, b.0), rg)
    }

    fn bcast_kind(a: &Tensor<T>, b: &Tensor<T>) -> Result<Bcast, GradError> {
        if a.shape() == b.shape() {
            Ok(Bcast::Same)
        } else if b.rows() == 1 && b.cols() == a.cols() {
            Ok(Bcast::Row)
        } else if b.len() == 1 {
            Ok(Bcast::Scalar)
        } else {
            Err(GradError::Shape(format!(
                "cannot broadcast {:?} onto {:?}",
                b.shape(),
                a.shape()
            )))
        }
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var, GradError> {
        let (av, bv) = (self.value(a), self.value(b));
        let bc = Self::bcast_kind(av, bv)?;
        let cols = av.cols();
        let f = |x: T, y: T| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
        };
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match bc {
                    Bcast::Same => bv.data()[i],
                    Bcast::Row => bv.data()[i % cols],
                    Bcast::Scalar => bv.data()[0],
                };
                f(x, y)
            })
            .collect();
        let value = Tensor::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.rg(a.0) || self.rg(b.0);
        self.push(value, Op::Binary(kind, a.0, b.0, bc), rg)
    }

    /// `a + b`; `b` may be a `1 x cols` row or a `1 x 1` scalar broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        self.binary(Binary::Sub, a, b)
    }

    /// Elementwise product with the same broadcasting rules as [`Graph::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var, GradError> {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a.0);
        self.push(value, Op::Scale(a.0, c), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(|x| x.tanh());
        let rg = self.rg(a.0);
        self.push(value, Op::Tanh(a.0), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a.0);
        self.push(value, Op::Sigmoid(a.0), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(a.0);
        self.push(value, Op::Relu(a.0), rg)
    }

    pub fn square(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a.0);
        self.push(value, Op::Square(a.0), rg)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        let mut out = av.clone();
        let cols = av.cols();
        for row in out.data_mut().chunks_mut(cols) {
            log_softmax_in_place(row);
        }
        let rg = self.rg(a.0);
        self.push(out, Op::LogSoftmax(a.0), rg)
    }

    /// Picks `a[r, index[r]]` for every row, giving a `rows x 1` column.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var, GradError> {
        let av = self.value(a);
        if index.len() != av.rows() {
            return Err(GradError::Shape(format!(
                "gather with {} indices over {} rows",
                index.len(),
                av.rows()
            )));
        }
        let mut data = Vec::with_capacity(index.len());
        for (r, &c) in index.iter().enumerate() {
            if c >= av.cols() {
                return Err(GradError::Index(format!("gather column {c} >= {}", av.cols())));
            }
            data.push(av.get(r, c));
        }
        let rg = self.rg(a.0);
        self.push(Tensor::column(data), Op::Gather(a.0, index.to_vec()), rg)
    }

    /// Row lookup `out[r] = a[index[r]]` (embedding tables).
    pub fn select_rows(&mut self, a: Var, index: &[usize]) -> Result<Var, GradError> {
        let av = self.value(a);
        let cols = av.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            if i >= av.rows() {
                return Err(GradError::Index(format!("row {i} >= {}", av.rows())));
            }
            data.extend_from_slice(av.row(i));
        }
        let value = Tensor::from_vec(index.len(), cols, data)?;
        let rg = self.rg(a.0);
        self.push(value, Op::SelectRows(a.0, index.to_vec()), rg)
    }

    /// Concatenates along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, GradError> {
        let Some(first) = parts.first() else {
            return Err(GradError::Shape("concat of nothing".into()));
        };
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for p in parts {
            let v = self.value(*p);
            if v.rows() != rows {
                return Err(GradError::Shape(format!(
                    "concat rows {} vs {}",
                    v.rows(),
                    rows
                )));
            }
            cols += v.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|p| self.rg(p.0));
        self.push(value, Op::Concat(parts.iter().map(|p| p.0).collect()), rg)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, GradError> {
        let av = self.value(a);
        if start >= end || end > av.cols() {
            return Err(GradError::Shape(format!(
                "column slice {start}..{end} of {} columns",
                av.cols()
            )));
        }
        let mut data = Vec::with_capacity(av.rows() * (end - start));
        for r in 0..av.rows() {
            data.extend_from_slice(&av.row(r)[start..end]);
        }
        let value = Tensor::from_vec(av.rows(), end - start, data)?;
        let rg = self.rg(a.0);
        self.push(value, Op::SliceCols(a.0, start), rg)
    }

    /// Reinterprets the row-major buffer with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, GradError> {
        let value = Tensor::from_vec(rows, cols, self.value(a).data().to_vec())?;
        let rg = self.rg(a.0);
        self.push(value, Op::Reshape(a.0), rg)
    }

    /// Sliding windows for a 1-D convolution.
    ///
    /// `x` is `batch x (length * channels)` laid out position-major. The result is
    /// `(batch * (length - width + 1)) x (width * channels)`, one row per window.
    pub fn unfold1d(
        &mut self,
        x: Var,
        length: usize,
        channels: usize,
        width: usize,
    ) -> Result<Var, GradError> {
        let xv = self.value(x);
        if xv.cols() != length * channels || width == 0 || width > length {
            return Err(GradError::Shape(format!(
                "unfold1d of {:?} with length {length}, channels {channels}, width {width}",
                xv.shape()
            )));
        }
        let windows = length - width + 1;
        let span = width * channels;
        let mut data = Vec::with_capacity(xv.rows() * windows * span);
        for b in 0..xv.rows() {
            let row = xv.row(b);
            for p in 0..windows {
                data.extend_from_slice(&row[p * channels..p * channels + span]);
            }
        }
        let value = Tensor::from_vec(xv.rows() * windows, span, data)?;
        let rg = self.rg(x.0);
        self.push(
            value,
            Op::Unfold1d {
                x: x.0,
                length,
                channels,
                width,
            },
            rg,
        )
    }

    /// Mean of all entries, as `1 x 1`.
    pub fn mean(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        let n = T::from_usize(av.len()).unwrap();
        let s: T = av.data().iter().copied().sum();
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s / n), Op::Mean(a.0), rg)
    }

    /// Sum of all entries, as `1 x 1`.
    pub fn sum(&mut self, a: Var) -> Result<Var, GradError> {
        let s: T = self.value(a).data().iter().copied().sum();
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s), Op::Sum(a.0), rg)
    }

    /// Reverse sweep from a scalar loss. Returns the gradient of every parameter
    /// leaf and clears the tape; a second call without a new forward pass errors.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>, GradError> {
        if self.consumed {
            return Err(GradError::GraphConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(GradError::Shape(format!(
                "backward from non-scalar {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        let mut out: Vec<(ParamId, Tensor<T>)> = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut acc = |j: usize, f: &dyn Fn(&mut [T])| {
                if !nodes[j].requires_grad {
                    return;
                }
                let slot = grads[j].get_or_insert_with(|| vec![T::zero(); nodes[j].value.len()]);
                f(slot);
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let t = Tensor::from_vec(node.value.rows(), node.value.cols(), g)?;
                    match out.iter_mut().find(|(pid, _)| pid == id) {
                        Some((_, existing)) => {
                            for (e, &v) in existing.data_mut().iter_mut().zip(t.data()) {
                                *e += v;
                            }
                        }
                        None => out.push((*id, t)),
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    acc(*a, &|da| gemm_nt_acc(&g, bv.data(), da, m, n, k));
                    acc(*b, &|db| gemm_tn_acc(av.data(), &g, db, m, k, n));
                }
                Op::Binary(kind, a, b, bc) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    let cols = av.cols();
                    let bval = |idx: usize| match bc {
                        Bcast::Same => bv.data()[idx],
                        Bcast::Row => bv.data()[idx % cols],
                        Bcast::Scalar => bv.data()[0],
                    };
                    acc(*a, &|da| {
                        for (idx, d) in da.iter_mut().enumerate() {
                            *d += match kind {
                                Binary::Add | Binary::Sub => g[idx],
                                Binary::Mul => g[idx] * bval(idx),
                            };
                        }
                    });
                    acc(*b, &|db| {
                        for (idx, &gi) in g.iter().enumerate() {
                            let contrib = match kind {
                                Binary::Add => gi,
                                Binary::Sub => -gi,
                                Binary::Mul => gi * av.data()[idx],
                            };
                            let target = match bc {
                                Bcast::Same => idx,
                                Bcast::Row => idx % cols,
                                Bcast::Scalar => 0,
                            };
                            db[target] += contrib;
                        }
                    });
                }
                Op::Scale(a, c) => acc(*a, &|da| {
                    for (d, &gi) in da.iter_mut().zip(&g) {
                        *d += gi * *c;
                    }
                }),
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(*a, &|da| {
                        for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y.data()) {
                            *d += gi * (T::one() - yi * yi);
                        }
                    })
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(*a, &|da| {
                        for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y.data()) {
                            *d += gi * yi * (T::one() - yi);
                        }
                    })
                }
                Op::Relu(a) => {
                    let x = &nodes[*a].value;
                    acc(*a, &|da| {
                        for ((d, &gi), &xi) in da.iter_mut().zip(&g).zip(x.data()) {
                            if xi > T::zero() {
                                *d += gi;
                            }
                        }
                    })
                }
                Op::Square(a) => {
                    let x = &nodes[*a].value;
                    acc(*a, &|da| {
                        for ((d, &gi), &xi) in da.iter_mut().zip(&g).zip(x.data()) {
                            *d += gi * (xi + xi);
                        }
                    })
                }
                Op::LogSoftmax(a) => {
                    let y = &node.value;
                    let cols = y.cols();
                    acc(*a, &|da| {
                        for r in 0..y.rows() {
                            let gr = &g[r * cols..(r + 1) * cols];
                            let total: T = gr.iter().copied().sum();
                            for c in 0..cols {
                                da[r * cols + c] += gr[c] - y.get(r, c).exp() * total;
                            }
                        }
                    })
                }
                Op::Gather(a, index) => {
                    let cols = nodes[*a].value.cols();
                    acc(*a, &|da| {
                        for (r, &c) in index.iter().enumerate() {
                            da[r * cols + c] += g[r];
                        }
                    })
                }
                Op::SelectRows(a, index) => {
                    let cols = nodes[*a].value.cols();
                    acc(*a, &|da| {
                        for (r, &src) in index.iter().enumerate() {
                            for c in 0..cols {
                                da[src * cols + c] += g[r * cols + c];
                            }
                        }
                    })
                }
                Op::Concat(parts) => {
                    let total_cols = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let pc = nodes[p].value.cols();
                        acc(p, &|dp| {
                            for r in 0..node.value.rows() {
                                for c in 0..pc {
                                    dp[r * pc + c] += g[r * total_cols + offset + c];
                                }
                            }
                        });
                        offset += pc;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src_cols = nodes[*a].value.cols();
                    let w = node.value.cols();
                    acc(*a, &|da| {
                        for r in 0..node.value.rows() {
                            for c in 0..w {
                                da[r * src_cols + start + c] += g[r * w + c];
                            }
                        }
                    })
                }
                Op::Reshape(a) => acc(*a, &|da| {
                    for (d, &gi) in da.iter_mut().zip(&g) {
                        *d += gi;
                    }
                }),
                Op::Unfold1d {
                    x,
                    length,
                    channels,
                    width,
                } => {
                    let windows = length - width + 1;
                    let span = width * channels;
                    let row_len = length * channels;
                    let batch = nodes[*x].value.rows();
                    acc(*x, &|dx| {
                        for b in 0..batch {
                            for p in 0..windows {
                                let src = &g[(b * windows + p) * span..(b * windows + p + 1) * span];
                                let dst = &mut dx[b * row_len + p * channels..b * row_len + p * channels + span];
                                for (d, &s) in dst.iter_mut().zip(src) {
                                    *d += s;
                                }
                            }
                        }
                    })
                }
                Op::Mean(a) => {
                    let n = T::from_usize(nodes[*a].value.len()).unwrap();
                    acc(*a, &|da| {
                        let gi = g[0] / n;
                        da.iter_mut().for_each(|d| *d += gi);
                    })
                }
                Op::Sum(a) => acc(*a, &|da| {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }),
            }
        }

        self.nodes.clear();
        self.consumed = true;
        out.sort_by_key(|(id, _)| *id);
        Ok(Gradients { entries: out })
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

/// Numerically stable in-place log-softmax of one row.
pub fn log_softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in row.iter() {
        s += (*v - max).exp();
    }
    let lse = max + s.ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
}
