//! Central finite-difference gradient checking.
//!
//! Each [`GradCase`] owns a parameter store and a closure that builds a scalar
//! loss from it. [`check`] compares the tape gradients against
//! `(f(p + h) - f(p - h)) / 2h` for every parameter entry.

use rand::Rng;

use crate::layers::{Conv1d, Embedding, Linear, Lstm, LstmCell};
use crate::{GradError, Graph, ParamStore, Tensor, Var};

type UnaryOp = fn(&mut Graph<f64>, Var) -> Result<Var, GradError>;

pub type LossFn = Box<dyn Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var, GradError>>;

pub struct GradCase {
    pub name: &'static str,
    pub store: ParamStore<f64>,
    pub loss: LossFn,
}

/// Relative error with a floor on the denominator so exact zeros compare sanely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn eval(case: &GradCase, store: &ParamStore<f64>) -> Result<f64, GradError> {
    let mut g = Graph::new();
    let l = (case.loss)(&mut g, store)?;
    Ok(g.value(l).item())
}

/// Largest relative error between analytic and central-difference gradients.
pub fn check(case: &GradCase, h: f64) -> Result<f64, GradError> {
    let mut g = Graph::new();
    let l = (case.loss)(&mut g, &case.store)?;
    let grads = g.backward(l)?;

    let mut store = case.store.clone();
    let mut worst = 0.0f64;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let analytic = grads
            .get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.value(id).rows(), store.value(id).cols()));
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + h;
            let up = eval(case, &store)?;
            store.value_mut(id).data_mut()[k] = orig - h;
            let down = eval(case, &store)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic.data()[k], numeric));
        }
    }
    Ok(worst)
}

fn random_tensor<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Projects an output onto fixed random weights so every entry reaches the loss.
fn project(g: &mut Graph<f64>, y: Var, weights: &Tensor<f64>) -> Result<Var, GradError> {
    let w = g.constant(weights.clone())?;
    let p = g.mul(y, w)?;
    g.sum(p)
}

/// One instance of every layer type and differentiable op, with random
/// parameters and inputs drawn from `rng`.
pub fn layer_cases<R: Rng>(rng: &mut R) -> Vec<GradCase> {
    let mut cases = Vec::new();
    let batch = 3;

    {
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "lin", 4, 5, rng).unwrap();
        let x = store.add("x", random_tensor(batch, 4, 1.0, rng)).unwrap();
        let proj = random_tensor(batch, 5, 1.0, rng);
        cases.push(GradCase {
            name: "linear",
            store,
            loss: Box::new(move |g, s| {
                let xv = g.param(s, x)?;
                let y = lin.bind(g, s)?.forward(g, xv)?;
                project(g, y, &proj)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "emb", 5, 3, rng).unwrap();
        let idx: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
        let proj = random_tensor(4, 3, 1.0, rng);
        cases.push(GradCase {
            name: "embedding",
            store,
            loss: Box::new(move |g, s| {
                let t = emb.bind(g, s)?;
                let y = g.select_rows(t, &idx)?;
                project(g, y, &proj)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "cell", 3, 4, rng).unwrap();
        let x = store.add("x", random_tensor(batch, 3, 1.0, rng)).unwrap();
        let h = store.add("h", random_tensor(batch, 4, 0.5, rng)).unwrap();
        let c = store.add("c", random_tensor(batch, 4, 0.5, rng)).unwrap();
        let ph = random_tensor(batch, 4, 1.0, rng);
        let pc = random_tensor(batch, 4, 1.0, rng);
        cases.push(GradCase {
            name: "lstm_cell",
            store,
            loss: Box::new(move |g, s| {
                let bound = cell.bind(g, s)?;
                let (xv, hv, cv) = (g.param(s, x)?, g.param(s, h)?, g.param(s, c)?);
                let (h2, c2) = bound.step(g, xv, hv, cv)?;
                let a = project(g, h2, &ph)?;
                let b = project(g, c2, &pc)?;
                g.add(a, b)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 2, 3, 2, rng).unwrap();
        let xs: Vec<_> = (0..3)
            .map(|t| store.add(format!("x{t}"), random_tensor(batch, 2, 1.0, rng)).unwrap())
            .collect();
        let proj = random_tensor(batch, 3, 1.0, rng);
        cases.push(GradCase {
            name: "lstm_stack_unrolled",
            store,
            loss: Box::new(move |g, s| {
                let bound = lstm.bind(g, s)?;
                let mut state = bound.zero_state(g, batch)?;
                let mut out = None;
                for &x in &xs {
                    let xv = g.param(s, x)?;
                    out = Some(bound.step(g, xv, &mut state)?);
                }
                project(g, out.unwrap(), &proj)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let (length, ch) = (5, 2);
        let conv = Conv1d::new(&mut store, "conv", ch, 3, 2, rng).unwrap();
        let x = store.add("x", random_tensor(batch, length * ch, 1.0, rng)).unwrap();
        let proj = random_tensor(batch, conv.output_len(length) * 3, 1.0, rng);
        cases.push(GradCase {
            name: "conv1d",
            store,
            loss: Box::new(move |g, s| {
                let xv = g.param(s, x)?;
                let y = conv.forward(g, s, xv, length)?;
                project(g, y, &proj)
            }),
        });
    }

    let unary: [(&'static str, UnaryOp); 5] = [
        ("tanh", |g, v| g.tanh(v)),
        ("sigmoid", |g, v| g.sigmoid(v)),
        ("relu", |g, v| g.relu(v)),
        ("square", |g, v| g.square(v)),
        ("scale", |g, v| g.scale(v, -1.7)),
    ];
    for (name, f) in unary {
        let mut store = ParamStore::new();
        let a = store.add("a", random_tensor(batch, 4, 2.0, rng)).unwrap();
        let proj = random_tensor(batch, 4, 1.0, rng);
        cases.push(GradCase {
            name,
            store,
            loss: Box::new(move |g, s| {
                let av = g.param(s, a)?;
                let y = f(g, av)?;
                project(g, y, &proj)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let a = store.add("logits", random_tensor(batch, 5, 2.0, rng)).unwrap();
        let idx: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..5)).collect();
        let proj = random_tensor(batch, 5, 1.0, rng);
        cases.push(GradCase {
            name: "log_softmax",
            store,
            loss: Box::new(move |g, s| {
                let av = g.param(s, a)?;
                let y = g.log_softmax(av)?;
                project(g, y, &proj)
            }),
        });
        let mut store = ParamStore::new();
        let a = store.add("logits", random_tensor(batch, 5, 2.0, rng)).unwrap();
        cases.push(GradCase {
            name: "log_softmax_gather_mean",
            store,
            loss: Box::new(move |g, s| {
                let av = g.param(s, a)?;
                let y = g.log_softmax(av)?;
                let picked = g.gather(y, &idx)?;
                g.mean(picked)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let a = store.add("a", random_tensor(batch, 4, 1.0, rng)).unwrap();
        let row = store.add("row", random_tensor(1, 4, 1.0, rng)).unwrap();
        let sc = store.add("scalar", random_tensor(1, 1, 1.0, rng)).unwrap();
        let b = store.add("b", random_tensor(batch, 4, 1.0, rng)).unwrap();
        let proj = random_tensor(batch, 4, 1.0, rng);
        cases.push(GradCase {
            name: "broadcast_arithmetic",
            store,
            loss: Box::new(move |g, s| {
                let (av, rv, sv, bv) = (g.param(s, a)?, g.param(s, row)?, g.param(s, sc)?, g.param(s, b)?);
                let y = g.add(av, rv)?;
                let y = g.mul(y, sv)?;
                let y = g.sub(y, bv)?;
                let y = g.mul(y, av)?;
                let y = g.sub(y, rv)?;
                project(g, y, &proj)
            }),
        });
    }
    {
        let mut store = ParamStore::new();
        let a = store.add("a", random_tensor(batch, 2, 1.0, rng)).unwrap();
        let b = store.add("b", random_tensor(batch, 3, 1.0, rng)).unwrap();
        let proj = random_tensor(batch * 2, 3, 1.0, rng);
        let w = store.add("w", random_tensor(3, 3, 1.0, rng)).unwrap();
        cases.push(GradCase {
            name: "concat_slice_reshape_matmul",
            store,
            loss: Box::new(move |g, s| {
                let (av, bv, wv) = (g.param(s, a)?, g.param(s, b)?, g.param(s, w)?);
                let y = g.concat(&[av, bv, av])?;
                let y = g.slice_cols(y, 1, 7)?;
                let y = g.reshape(y, batch * 2, 3)?;
                let y = g.matmul(y, wv)?;
                let y = g.square(y)?;
                project(g, y, &proj)
            }),
        });
    }
    cases
}
