use crate::{GradError, ParamId, ParamStore, Scalar, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments and per-parameter learning rates.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    lr: Vec<T>,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    /// One learning rate for every parameter currently in `store`.
    pub fn new(store: &ParamStore<T>, lr: T) -> Self {
        let shapes = store.params().iter().map(|p| p.value.shape());
        Self {
            beta1: T::lit(BETA1),
            beta2: T::lit(BETA2),
            eps: T::lit(EPSILON),
            step: 0,
            lr: vec![lr; store.len()],
            first: shapes.clone().map(|[r, c]| Tensor::zeros(r, c)).collect(),
            second: shapes.map(|[r, c]| Tensor::zeros(r, c)).collect(),
        }
    }

    /// Puts one parameter in its own learning-rate group.
    pub fn set_lr(&mut self, id: ParamId, lr: T) {
        self.lr[id.index()] = lr;
    }

    pub fn lr(&self, id: ParamId) -> T {
        self.lr[id.index()]
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected update using the gradients held in `store`.
    /// Nothing is written if any updated value would be non-finite.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<(), GradError> {
        let t = self.step + 1;
        let mut staged = Vec::with_capacity(store.len());
        for id in store.ids() {
            let i = id.index();
            let mut m = self.first[i].clone();
            let mut v = self.second[i].clone();
            let mut p = store.value(id).clone();
            adam_update(
                p.data_mut(),
                store.grad(id).data(),
                m.data_mut(),
                v.data_mut(),
                self.lr[i],
                self.beta1,
                self.beta2,
                self.eps,
                t,
            )
            .map_err(|e| match e {
                GradError::NonFinite(_) => GradError::NonFinite(format!("adam update of {}", store.name(id))),
                other => other,
            })?;
            staged.push((id, p, m, v));
        }
        for (id, p, m, v) in staged {
            *store.value_mut(id) = p;
            self.first[id.index()] = m;
            self.second[id.index()] = v;
        }
        self.step = t;
        Ok(())
    }

    /// Moment tensors as `(name, tensor)` pairs for checkpointing.
    pub fn export(&self, store: &ParamStore<T>) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::with_capacity(2 * store.len());
        for id in store.ids() {
            out.push((format!("adam.m/{}", store.name(id)), self.first[id.index()].clone()));
            out.push((format!("adam.v/{}", store.name(id)), self.second[id.index()].clone()));
        }
        out
    }

    /// Restores moments and the step counter written by [`Adam::export`].
    pub fn import(
        &mut self,
        store: &ParamStore<T>,
        step: u64,
        lookup: impl Fn(&str) -> Option<Tensor<T>>,
    ) -> Result<(), GradError> {
        for id in store.ids() {
            let i = id.index();
            for (prefix, slot) in [("adam.m/", &mut self.first[i]), ("adam.v/", &mut self.second[i])] {
                let name = format!("{prefix}{}", store.name(id));
                let t = lookup(&name).ok_or_else(|| GradError::Checkpoint(format!("missing {name}")))?;
                if t.shape() != slot.shape() {
                    return Err(GradError::Checkpoint(format!("shape mismatch for {name}")));
                }
                *slot = t;
            }
        }
        self.step = step;
        Ok(())
    }
}

/// In-place Adam update of one parameter tensor at (1-based) step `t`.
#[allow(clippy::too_many_arguments)]
pub fn adam_update<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u64,
) -> Result<(), GradError> {
    if params.len() != grads.len() || m.len() != params.len() || v.len() != params.len() {
        return Err(GradError::Shape("adam buffers misaligned".into()));
    }
    let t = t as i32;
    let c1 = T::one() - beta1.powi(t);
    let c2 = T::one() - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (T::one() - beta1) * g;
        v[i] = beta2 * v[i] + (T::one() - beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        let next = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        if !next.is_finite() {
            return Err(GradError::NonFinite("adam update".into()));
        }
        params[i] = next;
    }
    Ok(())
}
