//! Experiment configuration and construction of its oracle and initial data.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use ndgrad::Scalar;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_clustered_dataset, build_percentile_dataset, random_pool, LabeledDataset};
use crate::deltacs::{DeltaMode, DeltaSchedule, SearchMethod, SearchSpec};
use crate::error::{DcsError, Result};
use crate::gfnpolicy::{Objective, OfflineReward, PolicyConfig};
use crate::oracle::{
    space_size, HardVariant, LookupOracle, NkLandscape, Oracle, SequenceSpace, DEFAULT_ENUMERATION_LIMIT,
};
use crate::proxy::{AcquisitionConfig, ProxyConfig};
use crate::rankprior::DEFAULT_RANK_K;
use crate::seeds::{derive_seed, rng_from, stream};
use crate::seqcore::{Sequence, Vocabulary};

/// Current configuration schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub rounds: usize,
    pub query_batch: usize,
    /// Searched and offline sequences per policy update (each).
    pub half_batch: usize,
    pub top_k: usize,
    pub policy_steps: usize,
    pub objective: Objective,
    pub offline_reward: OfflineReward,
    pub oracle: OracleConfig,
    pub dataset: DatasetConfig,
    pub proxy: ProxyConfig,
    pub acquisition: AcquisitionConfig,
    pub policy: PolicyConfig,
    pub search: SearchConfig,
    /// Overrides applied to `search` when generating oracle queries.
    pub query: Option<SearchOverride>,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            rounds: 10,
            query_batch: 128,
            half_batch: 128,
            top_k: 128,
            policy_steps: 5000,
            objective: Objective::Tb,
            offline_reward: OfflineReward::Acquisition,
            oracle: OracleConfig::default(),
            dataset: DatasetConfig::default(),
            proxy: ProxyConfig::default(),
            acquisition: AcquisitionConfig::default(),
            policy: PolicyConfig::default(),
            search: SearchConfig::default(),
            query: None,
            report: ReportConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Nk,
    Lookup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub symbols: String,
    pub length: usize,
    /// NK interaction order K.
    pub epistasis: usize,
    /// Landscape seed; derived from the master seed when absent.
    pub seed: Option<u64>,
    /// `sequence,score` table for the lookup oracle.
    pub path: Option<PathBuf>,
    /// Score for sequences missing from the lookup table.
    pub default_score: Option<f64>,
    /// Scores below this become zero.
    pub hard_threshold: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Nk,
            symbols: "ACGT".into(),
            length: 8,
            epistasis: 2,
            seed: None,
            path: None,
            default_score: None,
            hard_threshold: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Clustered,
    Percentile,
    Random,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Number of sequences (clustered and random).
    pub size: usize,
    /// Maximum Hamming distance from the cluster seed.
    pub radius: usize,
    /// Score percentile of the cluster seed within the candidate pool.
    pub seed_percentile: f64,
    /// Truncation percentile for the percentile dataset.
    pub percentile: f64,
    /// Random candidate pool size; the full space is used when absent and enumerable.
    pub pool_size: Option<usize>,
    /// `sequence,score,round` CSV for the file dataset.
    pub path: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Clustered,
            size: 1024,
            radius: 3,
            seed_percentile: 60.0,
            percentile: 50.0,
            pool_size: None,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub method: SearchMethod,
    pub mode: DeltaMode,
    pub delta_const: f64,
    /// Uncertainty scaling; derived from the initial data when absent.
    pub lambda: Option<f64>,
    pub rank_k: f64,
    pub temperature: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            method: SearchMethod::DeltaCs,
            mode: DeltaMode::Adaptive,
            delta_const: 0.5,
            lambda: None,
            rank_k: DEFAULT_RANK_K,
            temperature: 1.0,
        }
    }
}

impl SearchConfig {
    /// Resolves to a concrete sampler given the experiment's `λ`.
    pub fn spec(&self, lambda: Option<f64>) -> Result<SearchSpec> {
        let lambda = match self.mode {
            DeltaMode::Constant => 0.0,
            DeltaMode::Adaptive => self.lambda.or(lambda).unwrap_or(0.0),
        };
        Ok(SearchSpec {
            method: self.method,
            schedule: DeltaSchedule::new(self.delta_const, lambda, self.mode)?,
            temperature: self.temperature,
        })
    }

    pub fn apply(&self, o: &SearchOverride) -> Self {
        Self {
            method: o.method.unwrap_or(self.method),
            mode: o.mode.unwrap_or(self.mode),
            delta_const: o.delta_const.unwrap_or(self.delta_const),
            lambda: o.lambda.or(self.lambda),
            rank_k: self.rank_k,
            temperature: o.temperature.unwrap_or(self.temperature),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOverride {
    pub method: Option<SearchMethod>,
    pub mode: Option<DeltaMode>,
    pub delta_const: Option<f64>,
    pub lambda: Option<f64>,
    pub temperature: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Record measured durations in `rounds.csv`. Off by default so that the
    /// report is a pure function of the configuration.
    pub wall_clock: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DcsError::InvalidArgument(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.query_batch == 0 || self.half_batch == 0 || self.top_k == 0 {
            return bad("query_batch, half_batch and top_k must be positive".into());
        }
        if self.objective == Objective::Vargrad && 2 * self.half_batch < 2 {
            return bad("vargrad needs at least two sequences per update".into());
        }
        if self.oracle.length == 0 {
            return bad("oracle.length must be positive".into());
        }
        for s in std::iter::once(self.search).chain(self.query.map(|q| self.search.apply(&q))) {
            if !(0.0..=1.0).contains(&s.delta_const) {
                return bad(format!("delta_const {} outside [0, 1]", s.delta_const));
            }
            if s.lambda.is_some_and(|l| !(l >= 0.0 && l.is_finite())) {
                return bad("lambda must be nonnegative".into());
            }
            if !(s.temperature >= 0.0 && s.temperature.is_finite()) {
                return bad("temperature must be nonnegative".into());
            }
        }
        self.proxy.validate()?;
        self.acquisition.validate()?;
        self.policy.validate()?;
        Ok(())
    }

    /// Sampler settings for oracle queries.
    pub fn query_search(&self) -> SearchConfig {
        match &self.query {
            Some(o) => self.search.apply(o),
            None => self.search,
        }
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::new(&self.oracle.symbols)
    }

    pub fn oracle_seed(&self) -> u64 {
        self.oracle
            .seed
            .unwrap_or_else(|| derive_seed(self.seed, &[stream::ORACLE]))
    }

    pub fn build_oracle<T: Scalar>(&self) -> Result<Arc<dyn Oracle<T>>> {
        let vocab = self.vocabulary()?;
        let o = &self.oracle;
        let base: Arc<dyn Oracle<T>> = match o.kind {
            OracleKind::Nk => Arc::new(NkLandscape::<T>::new(o.length, vocab.size(), o.epistasis, self.oracle_seed())?),
            OracleKind::Lookup => {
                let path = o
                    .path
                    .as_ref()
                    .ok_or_else(|| DcsError::InvalidArgument("oracle.path is required for lookup".into()))?;
                let table = LookupOracle::<T>::from_csv(
                    BufReader::new(File::open(path)?),
                    &vocab,
                    o.default_score.map(T::lit),
                )?;
                if table.length() != o.length {
                    return Err(DcsError::LengthMismatch(table.length(), o.length));
                }
                Arc::new(table)
            }
        };
        Ok(match o.hard_threshold {
            Some(th) => Arc::new(HardVariant::new(base, T::lit(th))),
            None => base,
        })
    }

    /// Candidate pool used for seed and percentile selection.
    fn pool<T: Scalar>(&self, oracle: &dyn Oracle<T>) -> Result<Vec<Sequence>> {
        let (v, l) = (oracle.vocab_size(), oracle.length());
        match self.dataset.pool_size {
            None if space_size(v, l) <= DEFAULT_ENUMERATION_LIMIT as u128 => {
                Ok(SequenceSpace::new(v, l, DEFAULT_ENUMERATION_LIMIT)?.collect())
            }
            None => Err(DcsError::InvalidArgument(
                "dataset.pool_size is required when the space cannot be enumerated".into(),
            )),
            Some(n) => random_pool(v, l, n, &mut rng_from(self.seed, &[stream::DATASET, 1])),
        }
    }

    /// Builds `D_0`.
    pub fn build_initial_dataset<T: Scalar>(&self, oracle: &dyn Oracle<T>) -> Result<LabeledDataset<T>> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Clustered => {
                let seed = self.cluster_seed(oracle)?;
                let mut rng = rng_from(self.seed, &[stream::DATASET, 0]);
                build_clustered_dataset(oracle, &seed, d.size, d.radius, &mut rng)
            }
            DatasetKind::Percentile => build_percentile_dataset(oracle, &self.pool(oracle)?, d.percentile),
            DatasetKind::Random => {
                let xs = random_pool(
                    oracle.vocab_size(),
                    oracle.length(),
                    d.size,
                    &mut rng_from(self.seed, &[stream::DATASET, 2]),
                )?;
                let ys = oracle.evaluate_batch(&xs)?;
                let mut ds = LabeledDataset::new();
                for (x, y) in xs.into_iter().zip(ys) {
                    ds.push(x, y, 0)?;
                }
                Ok(ds)
            }
            DatasetKind::File => {
                let path = d
                    .path
                    .as_ref()
                    .ok_or_else(|| DcsError::InvalidArgument("dataset.path is required for file".into()))?;
                let ds = LabeledDataset::read_csv(BufReader::new(File::open(path)?), &self.vocabulary()?)?;
                if ds.sequence_length().is_some_and(|l| l != oracle.length()) {
                    return Err(DcsError::LengthMismatch(ds.sequence_length().unwrap(), oracle.length()));
                }
                if ds.is_empty() {
                    return Err(DcsError::Empty("initial dataset file"));
                }
                Ok(ds)
            }
        }
    }

    /// The pool sequence at `seed_percentile` of the score ranking (ascending,
    /// ties in pool order).
    pub fn cluster_seed<T: Scalar>(&self, oracle: &dyn Oracle<T>) -> Result<Sequence> {
        let q = self.dataset.seed_percentile;
        if !(0.0..=100.0).contains(&q) {
            return Err(DcsError::InvalidArgument(format!("seed_percentile {q} outside [0, 100]")));
        }
        let pool = self.pool(oracle)?;
        let scores = oracle.evaluate_batch(&pool)?;
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
        let idx = ((q / 100.0) * (pool.len() - 1) as f64).round() as usize;
        Ok(pool[order[idx]].clone())
    }
}
