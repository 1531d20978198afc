//! Ensemble surrogate model with uncertainty-aware acquisition.

use std::io::Write;

use ndgrad::layers::{Conv1d, Linear};
use ndgrad::{Adam, Graph, ParamStore, Scalar, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{DcsError, Result};
use crate::rankprior::{RankPrior, DEFAULT_RANK_K};
use crate::seeds::{derive_seed, Rng};
use crate::seqcore::Sequence;

/// Lower bound applied to every acquisition value so that `ln R` is defined.
pub const REWARD_FLOOR: f64 = 1e-6;

/// Minimum dataset size for a validation split.
pub const MIN_VALIDATION_SIZE: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    Mlp,
    Cnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyConfig {
    pub architecture: Architecture,
    pub members: usize,
    pub hidden: usize,
    /// Output channels of the convolution (CNN only).
    pub channels: usize,
    /// Convolution window (CNN only).
    pub kernel_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_updates: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    /// Draw minibatches from the rank prior instead of uniform epochs.
    pub rank_weighted: bool,
    pub rank_k: f64,
    /// Continue from the previous round's parameters instead of re-initializing.
    pub warm_start: bool,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Mlp,
            members: 3,
            hidden: 256,
            channels: 64,
            kernel_width: 5,
            learning_rate: 1e-5,
            batch_size: 256,
            max_updates: 3000,
            patience: 5,
            validation_fraction: 0.1,
            rank_weighted: false,
            rank_k: DEFAULT_RANK_K,
            warm_start: false,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DcsError::InvalidArgument(format!("proxy: {m}")));
        if self.members == 0 {
            return bad("members must be positive");
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden and batch_size must be positive");
        }
        if self.architecture == Architecture::Cnn && (self.channels == 0 || self.kernel_width == 0) {
            return bad("channels and kernel_width must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Raw,
    #[default]
    Ucb,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    pub kappa: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kind: AcquisitionKind::Ucb,
            kappa: 0.1,
        }
    }
}

impl AcquisitionConfig {
    pub fn raw() -> Self {
        Self {
            kind: AcquisitionKind::Raw,
            kappa: 0.0,
        }
    }

    pub fn ucb(kappa: f64) -> Self {
        Self {
            kind: AcquisitionKind::Ucb,
            kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(DcsError::InvalidArgument(format!("kappa = {}", self.kappa)));
        }
        Ok(())
    }

    /// Acquisition value from a predictive mean and std, floored at [`REWARD_FLOOR`].
    pub fn score<T: Scalar>(&self, mean: T, std: T) -> T {
        let value = match self.kind {
            AcquisitionKind::Raw => mean,
            AcquisitionKind::Ucb => mean + T::lit(self.kappa) * std,
        };
        value.max(T::lit(REWARD_FLOOR))
    }
}

/// Anything that maps sequences to a scalar prediction.
pub trait Regressor<T: Scalar>: Send + Sync {
    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<T>>;
}

/// Flattened position-major one-hot encoding, `n x (L * V)`.
pub fn encode_one_hot<T: Scalar>(xs: &[Sequence], length: usize, vocab_size: usize) -> Result<Tensor<T>> {
    let width = length * vocab_size;
    let mut t = Tensor::zeros(xs.len(), width);
    let data = t.data_mut();
    for (r, x) in xs.iter().enumerate() {
        x.validate(vocab_size, length)?;
        for (i, &tok) in x.tokens().iter().enumerate() {
            data[r * width + i * vocab_size + tok as usize] = T::one();
        }
    }
    Ok(t)
}

#[derive(Clone, Debug)]
enum Body {
    Mlp { first: Linear, second: Linear },
    Cnn { conv: Conv1d, dense: Linear },
}

/// A single regression network: one-hot input, two hidden layers or a
/// convolution plus dense layer, then a linear scalar head.
#[derive(Clone, Debug)]
pub struct ProxyNetwork<T> {
    store: ParamStore<T>,
    body: Body,
    head: Linear,
    length: usize,
    vocab_size: usize,
}

impl<T: Scalar> ProxyNetwork<T> {
    pub fn new<R: rand::Rng + ?Sized>(
        cfg: &ProxyConfig,
        length: usize,
        vocab_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut store = ParamStore::new();
        let body = match cfg.architecture {
            Architecture::Mlp => Body::Mlp {
                first: Linear::new(&mut store, "dense1", length * vocab_size, cfg.hidden, rng)?,
                second: Linear::new(&mut store, "dense2", cfg.hidden, cfg.hidden, rng)?,
            },
            Architecture::Cnn => {
                if cfg.kernel_width > length {
                    return Err(DcsError::InvalidArgument(format!(
                        "kernel width {} exceeds sequence length {length}",
                        cfg.kernel_width
                    )));
                }
                let conv = Conv1d::new(&mut store, "conv", vocab_size, cfg.channels, cfg.kernel_width, rng)?;
                let flat = conv.output_len(length) * cfg.channels;
                Body::Cnn {
                    conv,
                    dense: Linear::new(&mut store, "dense", flat, cfg.hidden, rng)?,
                }
            }
        };
        let head = Linear::new(&mut store, "head", cfg.hidden, 1, rng)?;
        Ok(Self {
            store,
            body,
            head,
            length,
            vocab_size,
        })
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn forward(&self, g: &mut Graph<T>, xs: &[Sequence]) -> Result<Var> {
        let input = g.constant(encode_one_hot(xs, self.length, self.vocab_size)?)?;
        let h = match &self.body {
            Body::Mlp { first, second } => {
                let h = first.bind(g, &self.store)?.forward(g, input)?;
                let h = g.relu(h)?;
                let h = second.bind(g, &self.store)?.forward(g, h)?;
                g.relu(h)?
            }
            Body::Cnn { conv, dense } => {
                let h = conv.forward(g, &self.store, input, self.length)?;
                let h = g.relu(h)?;
                let h = dense.bind(g, &self.store)?.forward(g, h)?;
                g.relu(h)?
            }
        };
        Ok(self.head.bind(g, &self.store)?.forward(g, h)?)
    }

    fn mse_graph(&self, g: &mut Graph<T>, xs: &[Sequence], ys: &[T]) -> Result<Var> {
        let pred = self.forward(g, xs)?;
        let target = g.constant(Tensor::column(ys.to_vec()))?;
        let diff = g.sub(pred, target)?;
        let sq = g.square(diff)?;
        Ok(g.mean(sq)?)
    }

    /// Mean squared error on `(xs, ys)` without recording gradients.
    pub fn mse(&self, xs: &[Sequence], ys: &[T]) -> Result<T> {
        if xs.is_empty() {
            return Err(DcsError::Empty("mse input"));
        }
        let mut g = Graph::new();
        let l = self.mse_graph(&mut g, xs, ys)?;
        Ok(g.value(l).item())
    }
}

/// Chunk size for batched prediction.
const PREDICT_CHUNK: usize = 4096;

impl<T: Scalar> Regressor<T> for ProxyNetwork<T> {
    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(PREDICT_CHUNK) {
            let mut g = Graph::new();
            let y = self.forward(&mut g, chunk)?;
            out.extend_from_slice(g.value(y).data());
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow<T> {
    pub member: usize,
    /// Number of optimizer updates completed when the row was recorded.
    pub step: usize,
    pub train_mse: T,
    pub val_mse: Option<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport<T> {
    pub rows: Vec<ReportRow<T>>,
    /// Best validation MSE per member, when a split was used.
    pub best_val_mse: Vec<Option<T>>,
    pub updates: Vec<usize>,
}

impl<T: Scalar> TrainingReport<T> {
    /// Mean of the members' best validation MSEs, if every member had a split.
    pub fn mean_val_mse(&self) -> Option<T> {
        let vals: Option<Vec<T>> = self.best_val_mse.iter().copied().collect();
        let vals = vals?;
        if vals.is_empty() {
            return None;
        }
        Some(vals.iter().copied().sum::<T>() / T::lit(vals.len() as f64))
    }

    /// Writes `member,step,train_mse,val_mse`; an absent validation loss is left blank.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["member", "step", "train_mse", "val_mse"])?;
        for r in &self.rows {
            wtr.write_record([
                r.member.to_string(),
                r.step.to_string(),
                r.train_mse.to_string(),
                r.val_mse.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Trains one network in place by minibatch MSE with Adam. With a validation
/// split, evaluates once per epoch, stops after `patience` epochs without
/// improvement and restores the best parameters.
pub fn train_network<T: Scalar>(
    net: &mut ProxyNetwork<T>,
    data: &LabeledDataset<T>,
    cfg: &ProxyConfig,
    member: usize,
    rng: &mut Rng,
) -> Result<(Vec<ReportRow<T>>, Option<T>, usize)> {
    let n = data.len();
    if n == 0 {
        return Err(DcsError::Empty("proxy training data"));
    }
    let xs = data.sequences();
    let ys = data.scores();
    let mut order: Vec<usize> = (0..n).collect();
    let (train_idx, val_idx) = if n >= MIN_VALIDATION_SIZE {
        order.shuffle(rng);
        let n_val = ((n as f64) * cfg.validation_fraction).round().max(1.0) as usize;
        let (t, v) = order.split_at(n - n_val);
        (t.to_vec(), v.to_vec())
    } else {
        (order, Vec::new())
    };
    let pick = |idx: &[usize]| -> (Vec<Sequence>, Vec<T>) {
        (idx.iter().map(|&i| xs[i].clone()).collect(), idx.iter().map(|&i| ys[i]).collect())
    };
    let (val_x, val_y) = pick(&val_idx);
    let prior = if cfg.rank_weighted {
        let train_scores: Vec<T> = train_idx.iter().map(|&i| ys[i]).collect();
        Some(RankPrior::new(&train_scores, cfg.rank_k)?)
    } else {
        None
    };

    let mut adam = Adam::new(&net.store, T::lit(cfg.learning_rate));
    let mut rows = Vec::new();
    let mut best: Option<(T, ParamStore<T>)> = None;
    let mut stale = 0usize;
    let mut updates = 0usize;
    let batches_per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let mut epoch_idx = train_idx.clone();
    while updates < cfg.max_updates {
        let batches: Vec<Vec<usize>> = match &prior {
            Some(p) => (0..batches_per_epoch)
                .map(|_| (0..cfg.batch_size.min(train_idx.len())).map(|_| train_idx[p.sample(rng)]).collect())
                .collect(),
            None => {
                epoch_idx.shuffle(rng);
                epoch_idx.chunks(cfg.batch_size).map(|c| c.to_vec()).collect()
            }
        };
        let mut loss_sum = T::zero();
        let mut seen = 0usize;
        for batch in batches {
            if updates >= cfg.max_updates {
                break;
            }
            let (bx, by) = pick(&batch);
            let mut g = Graph::new();
            let l = net.mse_graph(&mut g, &bx, &by)?;
            let loss = g.value(l).item();
            if !loss.is_finite() {
                return Err(DcsError::NonFinite(format!("proxy member {member} loss")));
            }
            let grads = g.backward(l)?;
            net.store.zero_grads();
            net.store.accumulate(&grads);
            adam.step(&mut net.store)?;
            updates += 1;
            loss_sum += loss * T::lit(batch.len() as f64);
            seen += batch.len();
        }
        if seen == 0 {
            break;
        }
        let train_mse = loss_sum / T::lit(seen as f64);
        let val_mse = if val_idx.is_empty() {
            None
        } else {
            Some(net.mse(&val_x, &val_y)?)
        };
        rows.push(ReportRow {
            member,
            step: updates,
            train_mse,
            val_mse,
        });
        if let Some(v) = val_mse {
            match &best {
                Some((b, _)) if v >= *b => {
                    stale += 1;
                    if stale >= cfg.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((v, net.store.clone()));
                    stale = 0;
                }
            }
        }
    }
    let best_val = best.map(|(v, store)| {
        net.store = store;
        v
    });
    Ok((rows, best_val, updates))
}

enum Member<T> {
    Network(ProxyNetwork<T>),
    External(Box<dyn Regressor<T>>),
}

impl<T: Scalar> Member<T> {
    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<T>> {
        match self {
            Member::Network(n) => n.predict_batch(xs),
            Member::External(r) => r.predict_batch(xs),
        }
    }
}

/// `M` independently initialized regressors; predictions report the mean and
/// population standard deviation of the member outputs.
pub struct EnsembleProxy<T> {
    cfg: ProxyConfig,
    length: usize,
    vocab_size: usize,
    members: Vec<Member<T>>,
}

impl<T: Scalar> EnsembleProxy<T> {
    /// An untrained ensemble; call [`EnsembleProxy::train`] before predicting.
    pub fn new(cfg: ProxyConfig, length: usize, vocab_size: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            length,
            vocab_size,
            members: Vec::new(),
        })
    }

    /// An ensemble made of caller-supplied regressors, usable immediately.
    pub fn from_regressors(length: usize, vocab_size: usize, members: Vec<Box<dyn Regressor<T>>>) -> Result<Self> {
        if members.is_empty() {
            return Err(DcsError::Empty("ensemble members"));
        }
        let cfg = ProxyConfig {
            members: members.len(),
            ..ProxyConfig::default()
        };
        Ok(Self {
            cfg,
            length,
            vocab_size,
            members: members.into_iter().map(Member::External).collect(),
        })
    }

    pub fn config(&self) -> &ProxyConfig {
        &self.cfg
    }

    pub fn is_trained(&self) -> bool {
        !self.members.is_empty()
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Replaces member `i` with an arbitrary regressor.
    pub fn replace_member(&mut self, i: usize, r: Box<dyn Regressor<T>>) -> Result<()> {
        let slot = self
            .members
            .get_mut(i)
            .ok_or_else(|| DcsError::InvalidArgument(format!("member {i} does not exist")))?;
        *slot = Member::External(r);
        Ok(())
    }

    /// Network parameters of member `i`, if it is a trained network.
    pub fn member_store(&self, i: usize) -> Option<&ParamStore<T>> {
        match self.members.get(i)? {
            Member::Network(n) => Some(n.store()),
            Member::External(_) => None,
        }
    }

    /// Trains every member on `data`. Member `i` draws its initialization and
    /// shuffling from `derive_seed(seed, [i])`, so results do not depend on
    /// thread scheduling. Cold start unless `warm_start` is set and networks
    /// from a previous call exist.
    pub fn train(&mut self, data: &LabeledDataset<T>, seed: u64) -> Result<TrainingReport<T>> {
        if data.sequence_length().is_some_and(|l| l != self.length) {
            return Err(DcsError::LengthMismatch(data.sequence_length().unwrap(), self.length));
        }
        let cfg = &self.cfg;
        let previous: Vec<Option<ProxyNetwork<T>>> = if cfg.warm_start && self.members.len() == cfg.members {
            self.members
                .drain(..)
                .map(|m| match m {
                    Member::Network(n) => Some(n),
                    Member::External(_) => None,
                })
                .collect()
        } else {
            (0..cfg.members).map(|_| None).collect()
        };
        let (length, vocab) = (self.length, self.vocab_size);
        let results: Vec<Result<_>> = previous
            .into_par_iter()
            .enumerate()
            .map(|(i, prev)| {
                let mut rng = Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
                let mut net = match prev {
                    Some(n) => n,
                    None => ProxyNetwork::new(cfg, length, vocab, &mut rng)?,
                };
                let (rows, best, updates) = train_network(&mut net, data, cfg, i, &mut rng)?;
                Ok((net, rows, best, updates))
            })
            .collect();
        let mut report = TrainingReport::default();
        let mut members = Vec::with_capacity(results.len());
        for r in results {
            let (net, rows, best, updates) = r?;
            members.push(Member::Network(net));
            report.rows.extend(rows);
            report.best_val_mse.push(best);
            report.updates.push(updates);
        }
        self.members = members;
        Ok(report)
    }

    /// Raw outputs, indexed `[member][input]`.
    pub fn member_outputs(&self, xs: &[Sequence]) -> Result<Vec<Vec<T>>> {
        if !self.is_trained() {
            return Err(DcsError::UntrainedProxy);
        }
        self.members.iter().map(|m| m.predict_batch(xs)).collect()
    }

    /// Mean squared error of each member on `data`.
    pub fn member_mse(&self, data: &LabeledDataset<T>) -> Result<Vec<T>> {
        let outs = self.member_outputs(&data.sequences())?;
        let ys = data.scores();
        let n = T::lit(ys.len().max(1) as f64);
        Ok(outs
            .iter()
            .map(|o| o.iter().zip(&ys).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n)
            .collect())
    }

    /// `(mean, population std)` per input.
    pub fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<(T, T)>> {
        let outs = self.member_outputs(xs)?;
        Ok((0..xs.len())
            .map(|j| mean_std(outs.iter().map(|o| o[j])))
            .collect())
    }

    pub fn predict(&self, x: &Sequence) -> Result<(T, T)> {
        Ok(self.predict_batch(std::slice::from_ref(x))?[0])
    }

    pub fn acquire_batch(&self, xs: &[Sequence], cfg: &AcquisitionConfig) -> Result<Vec<T>> {
        Ok(self
            .predict_batch(xs)?
            .into_iter()
            .map(|(m, s)| cfg.score(m, s))
            .collect())
    }

    pub fn acquire(&self, x: &Sequence, cfg: &AcquisitionConfig) -> Result<T> {
        Ok(self.acquire_batch(std::slice::from_ref(x), cfg)?[0])
    }
}

/// Mean and population standard deviation. Identical values give exactly
/// that value and zero spread.
pub fn mean_std<T: Scalar>(values: impl Iterator<Item = T> + Clone) -> (T, T) {
    let first = values.clone().next().unwrap_or_else(T::zero);
    if values.clone().all(|v| v == first) {
        return (first, T::zero());
    }
    let n = T::lit(values.clone().count() as f64);
    let mean = values.clone().sum::<T>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SequenceSpace;
    use rand::Rng as _;

    struct Fixed(f64);

    impl Regressor<f64> for Fixed {
        fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<f64>> {
            Ok(vec![self.0; xs.len()])
        }
    }

    fn fixed(values: &[f64]) -> EnsembleProxy<f64> {
        let members = values
            .iter()
            .map(|&v| Box::new(Fixed(v)) as Box<dyn Regressor<f64>>)
            .collect();
        EnsembleProxy::from_regressors(2, 2, members).unwrap()
    }

    #[test]
    fn population_std_of_three_members() {
        let p = fixed(&[1.0, 2.0, 3.0]);
        let (m, s) = p.predict(&Sequence::new(vec![0, 1])).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (_, s) = fixed(&[0.7, 0.7, 0.7]).predict(&Sequence::new(vec![0, 1])).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn acquisition_examples() {
        let ucb = AcquisitionConfig::ucb(1.0);
        assert!((ucb.score(0.5, 0.1) - 0.6f64).abs() < 1e-15);
        assert_eq!(AcquisitionConfig::ucb(0.0).score(0.5, 0.1), 0.5f64);
        assert_eq!(AcquisitionConfig::raw().score(0.5, 0.1), 0.5f64);
        assert_eq!(AcquisitionConfig::raw().score(-1.0f64, 0.0), 1e-6);
        assert!(AcquisitionConfig::ucb(-0.1).validate().is_err());
    }

    #[test]
    fn untrained_proxy_errors() {
        let p = EnsembleProxy::<f64>::new(ProxyConfig::default(), 4, 4).unwrap();
        assert!(matches!(p.predict(&Sequence::new(vec![0; 4])), Err(DcsError::UntrainedProxy)));
    }

    fn small_cfg() -> ProxyConfig {
        ProxyConfig {
            hidden: 16,
            learning_rate: 1e-2,
            batch_size: 32,
            max_updates: 400,
            ..ProxyConfig::default()
        }
    }

    #[test]
    fn constant_target_is_fit() {
        let mut ds = LabeledDataset::new();
        for x in SequenceSpace::new(2, 5, 1 << 10).unwrap() {
            ds.push(x, 0.37, 0).unwrap();
        }
        let cfg = ProxyConfig {
            max_updates: 3000,
            patience: 3000,
            ..small_cfg()
        };
        let mut p = EnsembleProxy::new(cfg, 5, 2).unwrap();
        p.train(&ds, 5).unwrap();
        for mse in p.member_mse(&ds).unwrap() {
            assert!(mse <= 1e-4, "{mse}");
        }
    }

    #[test]
    fn training_is_reproducible_and_cnn_runs() {
        let mut rng = Rng::seed_from_u64(3);
        let mut ds = LabeledDataset::new();
        for x in SequenceSpace::new(4, 4, 1 << 10).unwrap().take(64) {
            ds.push(x, rng.gen::<f64>(), 0).unwrap();
        }
        for arch in [Architecture::Mlp, Architecture::Cnn] {
            let cfg = ProxyConfig {
                architecture: arch,
                kernel_width: 2,
                channels: 4,
                ..small_cfg()
            };
            let mut a = EnsembleProxy::new(cfg.clone(), 4, 4).unwrap();
            let mut b = EnsembleProxy::new(cfg, 4, 4).unwrap();
            let ra = a.train(&ds, 9).unwrap();
            let rb = b.train(&ds, 9).unwrap();
            assert_eq!(ra, rb);
            for i in 0..3 {
                let (sa, sb) = (a.member_store(i).unwrap(), b.member_store(i).unwrap());
                for (pa, pb) in sa.params().iter().zip(sb.params()) {
                    assert_eq!(pa.value, pb.value);
                }
            }
            assert!(ra.mean_val_mse().is_some());
        }
    }

    #[test]
    fn report_csv_header() {
        let report = TrainingReport {
            rows: vec![ReportRow {
                member: 0,
                step: 4,
                train_mse: 0.5f64,
                val_mse: None,
            }],
            best_val_mse: vec![None],
            updates: vec![4],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "member,step,train_mse,val_mse\n0,4,0.5,\n");
    }
}
