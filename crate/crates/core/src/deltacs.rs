//! Conservative search: rank-sampled references, Bernoulli masking and
//! left-to-right policy denoising, plus a suffix-masking baseline.

use ndgrad::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{DcsError, Result};
use crate::gfnpolicy::{PolicyModel, Trajectory};
use crate::proxy::EnsembleProxy;
use crate::rankprior::{RankPrior, DEFAULT_RANK_K};
use crate::seqcore::{MaskedSequence, Sequence};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    Constant,
    #[default]
    Adaptive,
}

/// `δ(σ) = clamp(δ_const - λσ, 0, 1)` in adaptive mode, `δ_const` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub delta_const: f64,
    pub lambda: f64,
    pub mode: DeltaMode,
}

impl DeltaSchedule {
    pub fn constant(delta: f64) -> Result<Self> {
        Self::new(delta, 0.0, DeltaMode::Constant)
    }

    pub fn adaptive(delta_const: f64, lambda: f64) -> Result<Self> {
        Self::new(delta_const, lambda, DeltaMode::Adaptive)
    }

    pub fn new(delta_const: f64, lambda: f64, mode: DeltaMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta_const) {
            return Err(DcsError::InvalidArgument(format!("delta_const {delta_const} outside [0, 1]")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(DcsError::InvalidArgument(format!("lambda {lambda}")));
        }
        Ok(Self {
            delta_const,
            lambda,
            mode,
        })
    }

    pub fn compute_delta(&self, sigma: f64) -> f64 {
        match self.mode {
            DeltaMode::Constant => self.delta_const,
            DeltaMode::Adaptive => (self.delta_const - self.lambda * sigma.max(0.0)).clamp(0.0, 1.0),
        }
    }
}

/// `λ` such that `λ · mean(σ) = 1 / L`.
pub fn derive_lambda(mean_sigma: f64, length: usize) -> Result<f64> {
    if !(mean_sigma > 0.0 && mean_sigma.is_finite()) {
        return Err(DcsError::ZeroVariance("mean proxy std"));
    }
    Ok(1.0 / (length as f64 * mean_sigma))
}

/// Masks each position independently with probability `delta`.
pub fn inject_noise<R: Rng + ?Sized>(x: &Sequence, delta: f64, rng: &mut R) -> Result<MaskedSequence> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(DcsError::InvalidArgument(format!("delta {delta} outside [0, 1]")));
    }
    Ok(MaskedSequence::new(
        x.tokens()
            .iter()
            .map(|&t| if rng.gen_bool(delta) { None } else { Some(t) })
            .collect(),
    ))
}

/// Backtracking length `K = round(δL)` with halves rounded up.
pub fn suffix_length(delta: f64, length: usize) -> usize {
    ((delta.clamp(0.0, 1.0) * length as f64 + 0.5).floor() as usize).min(length)
}

/// Masks exactly the last `k` positions.
pub fn mask_suffix(x: &Sequence, k: usize) -> MaskedSequence {
    let keep = x.len().saturating_sub(k);
    MaskedSequence::new(
        x.tokens()
            .iter()
            .enumerate()
            .map(|(i, &t)| (i < keep).then_some(t))
            .collect(),
    )
}

/// Fills the masked slots of one sequence with the policy.
pub fn denoise<T: Scalar, R: Rng + ?Sized>(
    masked: &MaskedSequence,
    policy: &PolicyModel<T>,
    rng: &mut R,
) -> Result<Sequence> {
    Ok(policy
        .denoise_batch(std::slice::from_ref(masked), 1.0, rng)?
        .remove(0)
        .sequence)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    #[default]
    DeltaCs,
    Suffix,
}

/// How searched sequences are produced around dataset references.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpec {
    pub method: SearchMethod,
    pub schedule: DeltaSchedule,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSample<T> {
    /// Index of the reference within the dataset.
    pub reference: usize,
    pub delta: f64,
    pub masked: MaskedSequence,
    pub trajectory: Trajectory<T>,
}

/// Rank prior and per-entry proxy uncertainty for one dataset snapshot.
#[derive(Clone, Debug)]
pub struct SearchContext {
    references: Vec<Sequence>,
    prior: RankPrior,
    sigmas: Vec<f64>,
}

impl SearchContext {
    /// Uses the proxy's std on each dataset entry; without a proxy every σ is 0.
    pub fn new<T: Scalar>(dataset: &LabeledDataset<T>, proxy: Option<&EnsembleProxy<T>>, k: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(DcsError::Empty("search dataset"));
        }
        let references = dataset.sequences();
        let prior = RankPrior::new(&dataset.scores(), k)?;
        let sigmas = match proxy {
            Some(p) => p.predict_batch(&references)?.into_iter().map(|(_, s)| s.as_f64()).collect(),
            None => vec![0.0; references.len()],
        };
        Ok(Self {
            references,
            prior,
            sigmas,
        })
    }

    pub fn with_default_k<T: Scalar>(dataset: &LabeledDataset<T>, proxy: Option<&EnsembleProxy<T>>) -> Result<Self> {
        Self::new(dataset, proxy, DEFAULT_RANK_K)
    }

    pub fn prior(&self) -> &RankPrior {
        &self.prior
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn mean_sigma(&self) -> f64 {
        self.sigmas.iter().sum::<f64>() / self.sigmas.len() as f64
    }

    pub fn references(&self) -> &[Sequence] {
        &self.references
    }

    /// Draws `m` references from the rank prior, masks each one according to
    /// `spec` and denoises the whole batch with the policy.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(
        &self,
        policy: &PolicyModel<T>,
        spec: &SearchSpec,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<SearchSample<T>>> {
        let mut refs = Vec::with_capacity(m);
        let mut deltas = Vec::with_capacity(m);
        let mut masks = Vec::with_capacity(m);
        for _ in 0..m {
            let i = self.prior.sample(rng);
            let x = &self.references[i];
            let (delta, masked) = match spec.method {
                SearchMethod::DeltaCs => {
                    let d = spec.schedule.compute_delta(self.sigmas[i]);
                    (d, inject_noise(x, d, rng)?)
                }
                SearchMethod::Suffix => {
                    let d = spec.schedule.delta_const;
                    (d, mask_suffix(x, suffix_length(d, x.len())))
                }
            };
            refs.push(i);
            deltas.push(delta);
            masks.push(masked);
        }
        let trajectories = policy.denoise_batch(&masks, spec.temperature, rng)?;
        Ok(refs
            .into_iter()
            .zip(deltas)
            .zip(masks)
            .zip(trajectories)
            .map(|(((reference, delta), masked), trajectory)| SearchSample {
                reference,
                delta,
                masked,
                trajectory,
            })
            .collect())
    }
}

/// `m` sequences from the rank-prior / mask / denoise pipeline.
pub fn delta_cs_batch<T: Scalar, R: Rng + ?Sized>(
    dataset: &LabeledDataset<T>,
    policy: &PolicyModel<T>,
    proxy: Option<&EnsembleProxy<T>>,
    schedule: &DeltaSchedule,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Sequence>> {
    let ctx = SearchContext::with_default_k(dataset, proxy)?;
    let spec = SearchSpec {
        method: SearchMethod::DeltaCs,
        schedule: *schedule,
        temperature: 1.0,
    };
    Ok(ctx
        .sample(policy, &spec, m, rng)?
        .into_iter()
        .map(|s| s.trajectory.sequence)
        .collect())
}

/// `m` sequences made by re-generating the last `round(δL)` tokens of rank-sampled references.
pub fn suffix_backtrack_batch<T: Scalar, R: Rng + ?Sized>(
    dataset: &LabeledDataset<T>,
    policy: &PolicyModel<T>,
    delta: f64,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Sequence>> {
    let ctx = SearchContext::with_default_k(dataset, None)?;
    let spec = SearchSpec {
        method: SearchMethod::Suffix,
        schedule: DeltaSchedule::constant(delta)?,
        temperature: 1.0,
    };
    Ok(ctx
        .sample(policy, &spec, m, rng)?
        .into_iter()
        .map(|s| s.trajectory.sequence)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfnpolicy::PolicyConfig;
    use crate::seqcore::hamming;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(length: usize) -> PolicyModel<f64> {
        let cfg = PolicyConfig {
            hidden: 8,
            embedding: 4,
            ..PolicyConfig::default()
        };
        PolicyModel::new(&cfg, length, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    fn dataset() -> LabeledDataset<f64> {
        let mut ds = LabeledDataset::new();
        for (i, t) in [[0u8, 1, 2, 3, 0, 1, 2, 3], [3, 3, 3, 3, 0, 0, 0, 0], [1, 1, 2, 2, 3, 3, 0, 0]]
            .iter()
            .enumerate()
        {
            ds.push(Sequence::new(t.to_vec()), i as f64, 0).unwrap();
        }
        ds
    }

    #[test]
    fn adaptive_delta_examples() {
        let s = DeltaSchedule::adaptive(0.5, 5.0).unwrap();
        assert_eq!(s.compute_delta(0.012), 0.44);
        assert_eq!(s.compute_delta(1e9), 0.0);
        assert_eq!(DeltaSchedule::adaptive(0.5, 0.0).unwrap().compute_delta(3.0), 0.5);
        assert_eq!(DeltaSchedule::constant(0.3).unwrap().compute_delta(3.0), 0.3);
        assert!(DeltaSchedule::constant(1.5).is_err());
        assert!((derive_lambda(0.025, 8).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn noise_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Sequence::new(vec![0, 1, 2, 3]);
        assert_eq!(inject_noise(&x, 0.0, &mut rng).unwrap(), MaskedSequence::unmasked(&x));
        assert_eq!(inject_noise(&x, 1.0, &mut rng).unwrap().mask_count(), 4);
        assert!(inject_noise(&x, -0.1, &mut rng).is_err());
    }

    #[test]
    fn suffix_lengths() {
        assert_eq!(suffix_length(0.5, 8), 4);
        assert_eq!(suffix_length(0.0, 8), 0);
        assert_eq!(suffix_length(1.0, 8), 8);
        assert_eq!(suffix_length(0.25, 6), 2); // 1.5 rounds up
        let m = mask_suffix(&Sequence::new(vec![0; 8]), 3);
        assert_eq!(
            m.slots().iter().map(|s| s.is_none()).collect::<Vec<_>>(),
            [false, false, false, false, false, true, true, true]
        );
    }

    #[test]
    fn zero_delta_returns_dataset_members() {
        let ds = dataset();
        let p = policy(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = delta_cs_batch(&ds, &p, None, &DeltaSchedule::constant(0.0).unwrap(), 40, &mut rng).unwrap();
        assert_eq!(out.len(), 40);
        assert!(out.iter().all(|x| ds.contains(x)));
        assert!(delta_cs_batch(&ds, &p, None, &DeltaSchedule::constant(0.5).unwrap(), 0, &mut rng)
            .unwrap()
            .is_empty());
        let out = suffix_backtrack_batch(&ds, &p, 0.0, 10, &mut rng).unwrap();
        assert!(out.iter().all(|x| ds.contains(x)));
    }

    #[test]
    fn edits_stay_within_masks() {
        let ds = dataset();
        let p = policy(8);
        let ctx = SearchContext::with_default_k(&ds, None).unwrap();
        let spec = SearchSpec {
            method: SearchMethod::DeltaCs,
            schedule: DeltaSchedule::constant(0.3).unwrap(),
            temperature: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in ctx.sample(&p, &spec, 200, &mut rng).unwrap() {
            let reference = &ds.entries()[s.reference].sequence;
            assert!(hamming(reference, &s.trajectory.sequence).unwrap() <= s.masked.mask_count());
        }
    }
}
