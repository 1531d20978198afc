//! The active-learning loop: proxy fitting, policy training, querying the
//! oracle and growing the dataset, with per-round persistence and replay.

use std::collections::{HashSet, VecDeque};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndgrad::{Checkpoint, Scalar};

use crate::config::ExperimentConfig;
use crate::dataset::LabeledDataset;
use crate::deltacs::{derive_lambda, DeltaMode, SearchContext};
use crate::error::{DcsError, Result};
use crate::gfnpolicy::{train_policy_round, write_policy_report, PolicyModel, PolicyReportRow, PolicyTrainer, RoundTrainConfig};
use crate::oracle::{Oracle, SequenceSpace, DEFAULT_ENUMERATION_LIMIT};
use crate::proxy::{EnsembleProxy, TrainingReport};
use crate::seeds::{derive_seed, rng_from, stream};
use crate::seqcore::{metrics_record, spearman, MetricsRecord, Sequence, Vocabulary};

/// Resampling budget for duplicate queries, in multiples of the batch size.
pub const QUERY_RETRY_FACTOR: usize = 10;

pub const ROUNDS_HEADER: &str =
    "round,topk_max,topk_median,topk_mean,query_max,query_mean,diversity,novelty,proxy_val_mse,mean_sigma,wall_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct RoundLog<T> {
    pub round: usize,
    /// Top-K of the dataset after the round; diversity and novelty refer to this set.
    pub topk: MetricsRecord<T>,
    pub query_count: usize,
    pub query_max: Option<T>,
    pub query_mean: Option<T>,
    pub proxy_val_mse: Option<T>,
    /// Proxy std over the round's queries.
    pub mean_sigma: Option<T>,
    /// Fewer than the requested number of novel queries were found.
    pub shortfall: bool,
    pub wall_ms: u64,
}

impl<T: Scalar> RoundLog<T> {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.round,
            self.topk.max,
            self.topk.median,
            self.topk.mean,
            opt(self.query_max),
            opt(self.query_mean),
            self.topk.diversity,
            self.topk.novelty,
            opt(self.proxy_val_mse),
            opt(self.mean_sigma),
            self.wall_ms
        )
    }
}

/// Everything produced by one round besides the state change.
#[derive(Clone, Debug)]
pub struct RoundOutcome<T> {
    pub log: RoundLog<T>,
    pub queries: Vec<Sequence>,
    pub proxy_report: TrainingReport<T>,
    pub policy_report: Vec<PolicyReportRow<T>>,
    pub elapsed_ms: u64,
}

/// State of an experiment between rounds.
pub struct Experiment<T: Scalar> {
    config: ExperimentConfig,
    vocab: Vocabulary,
    oracle: Arc<dyn Oracle<T>>,
    dataset: LabeledDataset<T>,
    initial: Vec<Sequence>,
    trainer: PolicyTrainer<T>,
    proxy: Option<EnsembleProxy<T>>,
    lambda: Option<f64>,
    round: usize,
}

impl<T: Scalar> Experiment<T> {
    /// Builds the oracle, `D_0` and the initial policy.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let oracle = config.build_oracle::<T>()?;
        Self::with_oracle(config, oracle)
    }

    /// Uses a caller-supplied oracle instead of the configured one.
    pub fn with_oracle(config: ExperimentConfig, oracle: Arc<dyn Oracle<T>>) -> Result<Self> {
        config.validate()?;
        let dataset = config.build_initial_dataset(oracle.as_ref())?;
        Self::from_parts(config, oracle, dataset)
    }

    /// Starts from an explicit initial dataset.
    pub fn from_parts(config: ExperimentConfig, oracle: Arc<dyn Oracle<T>>, dataset: LabeledDataset<T>) -> Result<Self> {
        config.validate()?;
        let vocab = config.vocabulary()?;
        if oracle.vocab_size() != vocab.size() {
            return Err(DcsError::InvalidArgument(format!(
                "oracle alphabet has {} symbols, configuration has {}",
                oracle.vocab_size(),
                vocab.size()
            )));
        }
        if dataset.is_empty() {
            return Err(DcsError::Empty("initial dataset"));
        }
        let policy = PolicyModel::new(
            &config.policy,
            oracle.length(),
            vocab.size(),
            &mut rng_from(config.seed, &[stream::POLICY_INIT]),
        )?;
        let trainer = PolicyTrainer::new(policy, &config.policy);
        let initial = dataset
            .entries()
            .iter()
            .filter(|e| e.round == 0)
            .map(|e| e.sequence.clone())
            .collect();
        Ok(Self {
            lambda: config.search.lambda,
            config,
            vocab,
            oracle,
            dataset,
            initial,
            trainer,
            proxy: None,
            round: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn oracle(&self) -> &Arc<dyn Oracle<T>> {
        &self.oracle
    }

    pub fn dataset(&self) -> &LabeledDataset<T> {
        &self.dataset
    }

    pub fn initial_sequences(&self) -> &[Sequence] {
        &self.initial
    }

    pub fn trainer(&self) -> &PolicyTrainer<T> {
        &self.trainer
    }

    pub fn proxy(&self) -> Option<&EnsembleProxy<T>> {
        self.proxy.as_ref()
    }

    /// `λ` in effect; set from the configuration or derived in round 1.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Number of completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Fits a fresh (or warm-started) proxy on the current dataset with the
    /// stream of round `t`.
    pub fn train_proxy(&mut self, t: usize) -> Result<TrainingReport<T>> {
        let mut proxy = match self.proxy.take() {
            Some(p) if self.config.proxy.warm_start => p,
            _ => EnsembleProxy::new(self.config.proxy.clone(), self.oracle.length(), self.vocab.size())?,
        };
        let report = proxy.train(&self.dataset, derive_seed(self.config.seed, &[stream::PROXY, t as u64]))?;
        self.proxy = Some(proxy);
        Ok(report)
    }

    /// One pass of proxy training, policy training and querying.
    pub fn run_round(&mut self) -> Result<RoundOutcome<T>> {
        let started = Instant::now();
        let t = self.round + 1;
        let cfg = self.config.clone();
        let proxy_report = self.train_proxy(t)?;
        let proxy = self.proxy.as_ref().expect("trained above");
        let context = SearchContext::new(&self.dataset, Some(proxy), cfg.search.rank_k)?;

        let adaptive = cfg.search.mode == DeltaMode::Adaptive || cfg.query_search().mode == DeltaMode::Adaptive;
        if adaptive && self.lambda.is_none() {
            self.lambda = Some(match derive_lambda(context.mean_sigma(), self.oracle.length()) {
                Ok(l) => l,
                Err(_) => {
                    log::warn!("proxy std is zero on the initial data; using lambda = 0");
                    0.0
                }
            });
        }
        let train_spec = cfg.search.spec(self.lambda)?;
        let query_spec = cfg.query_search().spec(self.lambda)?;

        let round_cfg = RoundTrainConfig {
            steps: cfg.policy_steps,
            half_batch: cfg.half_batch,
            objective: cfg.objective,
            offline_reward: cfg.offline_reward,
            acquisition: cfg.acquisition,
        };
        let mut rng = rng_from(cfg.seed, &[stream::POLICY_TRAIN, t as u64]);
        let policy_report = train_policy_round(
            &mut self.trainer,
            proxy,
            &self.dataset,
            &context,
            &train_spec,
            &round_cfg,
            &mut rng,
        )?;

        let mut rng = rng_from(cfg.seed, &[stream::QUERY, t as u64]);
        let budget = QUERY_RETRY_FACTOR * cfg.query_batch;
        let mut queries = Vec::with_capacity(cfg.query_batch);
        let mut chosen = HashSet::new();
        let mut drawn = 0usize;
        while queries.len() < cfg.query_batch && drawn < budget {
            let want = (cfg.query_batch - queries.len()).min(budget - drawn);
            for s in context.sample(&self.trainer.policy, &query_spec, want, &mut rng)? {
                let x = s.trajectory.sequence;
                if queries.len() < cfg.query_batch && !self.dataset.contains(&x) && chosen.insert(x.clone()) {
                    queries.push(x);
                }
            }
            drawn += want;
        }
        let shortfall = queries.len() < cfg.query_batch;
        if shortfall {
            log::warn!(
                "round {t}: only {} novel queries of {} after {drawn} draws",
                queries.len(),
                cfg.query_batch
            );
        }
        let scores = self.oracle.evaluate_batch(&queries)?;
        let mean_sigma = if queries.is_empty() {
            None
        } else {
            let preds = proxy.predict_batch(&queries)?;
            Some(preds.iter().map(|p| p.1).sum::<T>() / T::lit(preds.len() as f64))
        };
        for (x, &y) in queries.iter().zip(&scores) {
            self.dataset.push(x.clone(), y, t)?;
        }
        self.round = t;

        let topk = metrics_record(&self.dataset.pairs(), cfg.top_k, &self.initial)?;
        let (query_max, query_mean) = if scores.is_empty() {
            (None, None)
        } else {
            let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
            (Some(max), Some(scores.iter().copied().sum::<T>() / T::lit(scores.len() as f64)))
        };
        let elapsed_ms = started.elapsed().as_millis() as u64;
        let log = RoundLog {
            round: t,
            topk,
            query_count: queries.len(),
            query_max,
            query_mean,
            proxy_val_mse: proxy_report.mean_val_mse(),
            mean_sigma,
            shortfall,
            wall_ms: if cfg.report.wall_clock { elapsed_ms } else { 0 },
        };
        Ok(RoundOutcome {
            log,
            queries,
            proxy_report,
            policy_report,
            elapsed_ms,
        })
    }

    /// Runs the remaining rounds in memory.
    pub fn run(&mut self) -> Result<Vec<RoundLog<T>>> {
        let mut logs = Vec::new();
        while self.round < self.config.rounds {
            logs.push(self.run_round()?.log);
        }
        Ok(logs)
    }

    /// Runs the remaining rounds, persisting reports, snapshots and
    /// checkpoints under `dir`. Rows already in `dir/rounds.csv` are kept.
    pub fn run_persisted(&mut self, dir: &Path) -> Result<Vec<RoundLog<T>>> {
        let layout = RunLayout::create(dir)?;
        let rounds_path = layout.rounds_csv();
        if !rounds_path.exists() {
            fs::write(&rounds_path, format!("{ROUNDS_HEADER}\n"))?;
        }
        if self.round == 0 {
            self.save_round(&layout)?;
        }
        let mut logs = Vec::new();
        while self.round < self.config.rounds {
            let outcome = self.run_round()?;
            let mut rounds = fs::OpenOptions::new().append(true).open(&rounds_path)?;
            writeln!(rounds, "{}", outcome.log.csv_row())?;
            let mut timings = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(layout.root.join("timings.csv"))?;
            writeln!(timings, "{},{}", outcome.log.round, outcome.elapsed_ms)?;
            outcome
                .proxy_report
                .write_csv(BufWriter::new(File::create(layout.report(self.round, "proxy"))?))?;
            write_policy_report(
                &outcome.policy_report,
                BufWriter::new(File::create(layout.report(self.round, "policy"))?),
            )?;
            self.save_round(&layout)?;
            logs.push(outcome.log);
        }
        Ok(logs)
    }

    fn save_round(&self, layout: &RunLayout) -> Result<()> {
        self.dataset
            .write_csv(BufWriter::new(File::create(layout.snapshot(self.round))?), &self.vocab)?;
        let mut meta = vec![
            ("round", self.round.to_string()),
            ("seed", self.config.seed.to_string()),
        ];
        if let Some(l) = self.lambda {
            meta.push(("lambda", l.to_string()));
        }
        let mut w = BufWriter::new(File::create(layout.checkpoint(self.round))?);
        self.trainer.write_checkpoint(&mut w, &meta)?;
        w.flush()?;
        Ok(())
    }

    /// Restores the state saved after round `round` in `dir`. The proxy is
    /// re-fitted at the start of the next round, so it is not stored.
    pub fn resume(config: ExperimentConfig, dir: &Path, round: usize) -> Result<Self> {
        if config.proxy.warm_start {
            return Err(DcsError::InvalidArgument(
                "replay needs a cold-started proxy; warm_start keeps state that is not persisted".into(),
            ));
        }
        config.validate()?;
        let layout = RunLayout { root: dir.to_path_buf() };
        let vocab = config.vocabulary()?;
        let dataset = LabeledDataset::read_csv(BufReader::new(File::open(layout.snapshot(round))?), &vocab)?;
        let oracle = config.build_oracle::<T>()?;
        let mut exp = Self::from_parts(config, oracle, dataset)?;
        let ckpt = Checkpoint::read_from(BufReader::new(File::open(layout.checkpoint(round))?))?;
        exp.trainer.restore(&ckpt)?;
        let saved_round: usize = ckpt
            .meta
            .get("round")
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| DcsError::Malformed("checkpoint lacks round".into()))?;
        if saved_round != round {
            return Err(DcsError::Malformed(format!("checkpoint is for round {saved_round}, not {round}")));
        }
        exp.lambda = match ckpt.meta.get("lambda") {
            Some(l) => Some(l.parse().map_err(|_| DcsError::Malformed(format!("lambda {l:?}")))?),
            None => exp.config.search.lambda,
        };
        exp.round = round;
        Ok(exp)
    }
}

/// Output directory layout of one run.
#[derive(Clone, Debug)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["snapshots", "checkpoints", "reports"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn rounds_csv(&self) -> PathBuf {
        self.root.join("rounds.csv")
    }

    pub fn snapshot(&self, round: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("round_{round:03}.csv"))
    }

    pub fn checkpoint(&self, round: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("policy_round_{round:03}.ckpt"))
    }

    pub fn report(&self, round: usize, kind: &str) -> PathBuf {
        self.root.join("reports").join(format!("{kind}_round_{round:03}.csv"))
    }
}

/// Lexicographic index of a sequence, matching [`SequenceSpace`] order.
pub fn sequence_index(x: &Sequence, vocab_size: usize) -> usize {
    x.tokens().iter().fold(0, |acc, &t| acc * vocab_size + t as usize)
}

/// Hamming distance from every point of `V^L` to the nearest source, by
/// breadth-first search over single substitutions. Indexed lexicographically.
pub fn distances_to_set(sources: &[Sequence], vocab_size: usize, length: usize, limit: u64) -> Result<Vec<usize>> {
    let n = SequenceSpace::new(vocab_size, length, limit)?.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for x in sources {
        x.validate(vocab_size, length)?;
        let i = sequence_index(x, vocab_size);
        if dist[i] != 0 {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    let mut stride = vec![1usize; length];
    for p in (0..length.saturating_sub(1)).rev() {
        stride[p] = stride[p + 1] * vocab_size;
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i] + 1;
        for &s in &stride {
            let digit = (i / s) % vocab_size;
            let base = i - digit * s;
            for v in 0..vocab_size {
                let j = base + v * s;
                if dist[j] == usize::MAX {
                    dist[j] = d;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(dist)
}

/// One row of the stratified proxy-quality table.
#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    /// Maximum distance to `D_0`; `None` for the full space.
    pub max_distance: Option<usize>,
    pub size: usize,
    pub spearman: f64,
}

impl Stratum {
    pub fn label(&self) -> String {
        match self.max_distance {
            Some(d) => format!("<={d}"),
            None => "all".into(),
        }
    }
}

/// Fits the round-1 proxy on `D_0` and reports Spearman(f, μ) over
/// `{x : distance(x, D_0) <= d}` for each `d`, then over the whole space.
pub fn analyze_proxy_failure<T: Scalar>(config: &ExperimentConfig, max_distances: &[usize]) -> Result<Vec<Stratum>> {
    let mut exp = Experiment::<T>::new(config.clone())?;
    analyze_experiment(&mut exp, max_distances)
}

pub fn analyze_experiment<T: Scalar>(exp: &mut Experiment<T>, max_distances: &[usize]) -> Result<Vec<Stratum>> {
    let (v, l) = (exp.vocab.size(), exp.oracle.length());
    let space: Vec<Sequence> = SequenceSpace::new(v, l, DEFAULT_ENUMERATION_LIMIT)?.collect();
    exp.train_proxy(exp.round + 1)?;
    let proxy = exp.proxy.as_ref().expect("trained above");
    let truth = exp.oracle.evaluate_batch(&space)?;
    let mu: Vec<T> = proxy.predict_batch(&space)?.into_iter().map(|p| p.0).collect();
    let sources = exp.dataset.sequences();
    let dist = distances_to_set(&sources, v, l, DEFAULT_ENUMERATION_LIMIT)?;
    let mut out = Vec::with_capacity(max_distances.len() + 1);
    for d in max_distances.iter().map(|&d| Some(d)).chain(std::iter::once(None)) {
        let idx: Vec<usize> = (0..space.len()).filter(|&i| d.is_none_or(|d| dist[i] <= d)).collect();
        let f: Vec<T> = idx.iter().map(|&i| truth[i]).collect();
        let m: Vec<T> = idx.iter().map(|&i| mu[i]).collect();
        out.push(Stratum {
            max_distance: d,
            size: idx.len(),
            spearman: spearman(&f, &m)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DatasetKind;
    use crate::gfnpolicy::PolicyConfig;
    use crate::proxy::ProxyConfig;

    pub(crate) fn toy_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            rounds: 2,
            query_batch: 8,
            half_batch: 4,
            top_k: 8,
            policy_steps: 3,
            proxy: ProxyConfig {
                hidden: 8,
                learning_rate: 1e-2,
                batch_size: 16,
                max_updates: 20,
                ..ProxyConfig::default()
            },
            policy: PolicyConfig {
                hidden: 8,
                embedding: 4,
                ..PolicyConfig::default()
            },
            ..ExperimentConfig::default()
        };
        cfg.oracle.length = 5;
        cfg.dataset.kind = DatasetKind::Random;
        cfg.dataset.size = 30;
        cfg
    }

    #[test]
    fn rounds_grow_dataset_and_keep_true_scores() {
        let mut cfg = toy_config();
        cfg.search.lambda = Some(1.0);
        let mut exp = Experiment::<f64>::new(cfg).unwrap();
        let before = exp.dataset().len();
        let logs = exp.run().unwrap();
        assert_eq!(logs.len(), 2);
        assert_eq!(exp.dataset().len(), before + 16);
        for e in exp.dataset().entries() {
            assert_eq!(e.score, exp.oracle().evaluate(&e.sequence).unwrap());
        }
        assert!(logs[1].topk.max >= logs[0].topk.max);
        assert_eq!(exp.lambda(), Some(1.0));
    }

    #[test]
    fn lambda_is_derived_from_initial_uncertainty() {
        let mut probe = Experiment::<f64>::new(toy_config()).unwrap();
        probe.train_proxy(1).unwrap();
        let ctx = SearchContext::new(probe.dataset(), probe.proxy(), 0.01).unwrap();
        let expected = 1.0 / (5.0 * ctx.mean_sigma());

        let mut exp = Experiment::<f64>::new(toy_config()).unwrap();
        exp.run_round().unwrap();
        assert_eq!(exp.lambda(), Some(expected));
    }

    #[test]
    fn zero_delta_without_training_reports_shortfall() {
        let mut cfg = toy_config();
        cfg.policy_steps = 0;
        cfg.search.mode = DeltaMode::Constant;
        cfg.search.delta_const = 0.0;
        let mut exp = Experiment::<f64>::new(cfg).unwrap();
        let before = exp.dataset().len();
        let out = exp.run_round().unwrap();
        assert!(out.log.shortfall);
        assert_eq!(out.queries.len(), 0);
        assert_eq!(exp.dataset().len(), before);
        assert!(out.log.csv_row().contains(",,"));
    }

    #[test]
    fn bfs_distances_match_brute_force() {
        let sources = vec![Sequence::new(vec![0, 1, 2]), Sequence::new(vec![2, 2, 0])];
        let dist = distances_to_set(&sources, 3, 3, 1000).unwrap();
        for (i, x) in SequenceSpace::new(3, 3, 1000).unwrap().enumerate() {
            assert_eq!(sequence_index(&x, 3), i);
            let brute = sources
                .iter()
                .map(|s| crate::seqcore::hamming(s, &x).unwrap())
                .min()
                .unwrap();
            assert_eq!(dist[i], brute);
        }
    }
}
