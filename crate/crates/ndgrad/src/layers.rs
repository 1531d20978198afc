//! Parameterized building blocks.
//!
//! Each layer owns [`ParamId`]s into a [`ParamStore`]. Before a forward pass a
//! layer is bound to a [`Graph`], which registers its parameters once so that
//! recurrent cells can be applied repeatedly without copying weights per step.

use rand::Rng;

use crate::{GradError, Graph, ParamId, ParamStore, Scalar, Tensor, Var};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
pub fn uniform_init<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("sized buffer")
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLinear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self, GradError> {
        let weight = store.add(
            format!("{name}.weight"),
            uniform_init(inputs, outputs, inputs, rng),
        )?;
        let bias = store.add(format!("{name}.bias"), uniform_init(1, outputs, inputs, rng))?;
        Ok(Self {
            weight,
            bias,
            inputs,
            outputs,
        })
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<BoundLinear, GradError> {
        Ok(BoundLinear {
            weight: g.param(store, self.weight)?,
            bias: g.param(store, self.bias)?,
        })
    }
}

impl BoundLinear {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Result<Var, GradError> {
        let xw = g.matmul(x, self.weight)?;
        g.add(xw, self.bias)
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        count: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, GradError> {
        let table = store.add(format!("{name}.table"), uniform_init(count, dim, dim, rng))?;
        Ok(Self { table, count, dim })
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<Var, GradError> {
        g.param(store, self.table)
    }
}

/// Long short-term memory cell with gate order (input, forget, cell, output).
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLstmCell {
    input_weight: Var,
    hidden_weight: Var,
    bias: Var,
    hidden: usize,
}

impl LstmCell {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self, GradError> {
        let input_weight = store.add(
            format!("{name}.input_weight"),
            uniform_init(inputs, 4 * hidden, inputs, rng),
        )?;
        let hidden_weight = store.add(
            format!("{name}.hidden_weight"),
            uniform_init(hidden, 4 * hidden, hidden, rng),
        )?;
        let bias = store.add(format!("{name}.bias"), uniform_init(1, 4 * hidden, hidden, rng))?;
        Ok(Self {
            input_weight,
            hidden_weight,
            bias,
            inputs,
            hidden,
        })
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<BoundLstmCell, GradError> {
        Ok(BoundLstmCell {
            input_weight: g.param(store, self.input_weight)?,
            hidden_weight: g.param(store, self.hidden_weight)?,
            bias: g.param(store, self.bias)?,
            hidden: self.hidden,
        })
    }
}

impl BoundLstmCell {
    /// One step; returns the new `(h, c)`.
    pub fn step<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), GradError> {
        let hd = self.hidden;
        let xi = g.matmul(x, self.input_weight)?;
        let hh = g.matmul(h, self.hidden_weight)?;
        let pre = g.add(xi, hh)?;
        let gates = g.add(pre, self.bias)?;
        let i = g.slice_cols(gates, 0, hd)?;
        let i = g.sigmoid(i)?;
        let f = g.slice_cols(gates, hd, 2 * hd)?;
        let f = g.sigmoid(f)?;
        let cand = g.slice_cols(gates, 2 * hd, 3 * hd)?;
        let cand = g.tanh(cand)?;
        let o = g.slice_cols(gates, 3 * hd, 4 * hd)?;
        let o = g.sigmoid(o)?;
        let kept = g.mul(f, c)?;
        let written = g.mul(i, cand)?;
        let c_next = g.add(kept, written)?;
        let squashed = g.tanh(c_next)?;
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }
}

/// Stacked LSTM.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub cells: Vec<LstmCell>,
}

/// Per-layer `(h, c)` pairs.
pub type LstmState = Vec<(Var, Var)>;

#[derive(Clone, Debug)]
pub struct BoundLstm {
    cells: Vec<BoundLstmCell>,
    hidden: usize,
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self, GradError> {
        let cells = (0..layers)
            .map(|l| {
                let fan = if l == 0 { inputs } else { hidden };
                LstmCell::new(store, &format!("{name}.{l}"), fan, hidden, rng)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { cells })
    }

    pub fn hidden(&self) -> usize {
        self.cells.first().map_or(0, |c| c.hidden)
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<BoundLstm, GradError> {
        Ok(BoundLstm {
            cells: self
                .cells
                .iter()
                .map(|c| c.bind(g, store))
                .collect::<Result<_, _>>()?,
            hidden: self.hidden(),
        })
    }
}

impl BoundLstm {
    pub fn zero_state<T: Scalar>(&self, g: &mut Graph<T>, batch: usize) -> Result<LstmState, GradError> {
        let zeros = g.constant(Tensor::zeros(batch, self.hidden))?;
        Ok(vec![(zeros, zeros); self.cells.len()])
    }

    /// Advances every layer one step and returns the top layer's output.
    pub fn step<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        x: Var,
        state: &mut LstmState,
    ) -> Result<Var, GradError> {
        let mut input = x;
        for (cell, slot) in self.cells.iter().zip(state.iter_mut()) {
            let (h, c) = cell.step(g, input, slot.0, slot.1)?;
            *slot = (h, c);
            input = h;
        }
        Ok(input)
    }
}

/// 1-D convolution over position-major inputs, no padding, stride 1.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub channels_in: usize,
    pub channels_out: usize,
    pub width: usize,
}

impl Conv1d {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        channels_in: usize,
        channels_out: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self, GradError> {
        let fan = width * channels_in;
        let weight = store.add(
            format!("{name}.weight"),
            uniform_init(fan, channels_out, fan, rng),
        )?;
        let bias = store.add(format!("{name}.bias"), uniform_init(1, channels_out, fan, rng))?;
        Ok(Self {
            weight,
            bias,
            channels_in,
            channels_out,
            width,
        })
    }

    pub fn output_len(&self, length: usize) -> usize {
        length + 1 - self.width
    }

    /// `x` is `batch x (length * channels_in)`; output is
    /// `batch x (windows * channels_out)`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        length: usize,
    ) -> Result<Var, GradError> {
        let batch = g.value(x).rows();
        let cols = g.unfold1d(x, length, self.channels_in, self.width)?;
        let w = g.param(store, self.weight)?;
        let b = g.param(store, self.bias)?;
        let y = g.matmul(cols, w)?;
        let y = g.add(y, b)?;
        g.reshape(y, batch, self.output_len(length) * self.channels_out)
    }
}
