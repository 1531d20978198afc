//! Rank-based reweighting of a scored dataset.

use ndgrad::Scalar;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{DcsError, Result};

/// Shift factor used for the rank prior unless configured otherwise.
pub const DEFAULT_RANK_K: f64 = 0.01;

/// Sampling distribution with weight proportional to `1 / (k N + rank)`,
/// rank 1 being the best score. Ties keep insertion order.
#[derive(Clone, Debug)]
pub struct RankPrior {
    k: f64,
    weights: Vec<f64>,
    ranks: Vec<usize>,
    dist: WeightedIndex<f64>,
}

impl RankPrior {
    pub fn new<T: Scalar>(scores: &[T], k: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(DcsError::Empty("rank prior dataset"));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(DcsError::InvalidArgument(format!("rank shift k = {k}")));
        }
        let ranks = ranks_descending(scores);
        let shift = k * scores.len() as f64;
        let raw: Vec<f64> = ranks.iter().map(|&r| 1.0 / (shift + r as f64)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| DcsError::InvalidArgument(format!("rank weights: {e}")))?;
        Ok(Self {
            k,
            weights,
            ranks,
            dist,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Normalized weights in dataset order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// 1-based ranks in dataset order.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Index of a dataset entry drawn with the rank weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// 1-based ranks by descending score; equal scores rank by position.
pub fn ranks_descending<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_entry_weights() {
        let p = RankPrior::new(&[0.2f64, 0.9, 0.5], 0.01).unwrap();
        assert_eq!(p.ranks(), &[3, 1, 2]);
        let raw = [1.0 / 3.03, 1.0 / 1.03, 1.0 / 2.03];
        let z: f64 = raw.iter().sum();
        for (w, r) in p.weights().iter().zip(raw) {
            assert!((w - r / z).abs() < 1e-12);
        }
        assert!((p.weights()[1] - 0.541324).abs() < 1e-6);
        assert!((p.weights()[2] - 0.274662).abs() < 1e-6);
        assert!((p.weights()[0] - 0.184014).abs() < 1e-6);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_keep_insertion_order() {
        assert_eq!(ranks_descending(&[1.0f64, 1.0, 2.0, 1.0]), vec![2, 3, 1, 4]);
    }

    #[test]
    fn singleton_always_sampled() {
        let p = RankPrior::new(&[0.3f64], 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| p.sample(&mut rng) == 0));
        assert!(RankPrior::new::<f64>(&[], 0.01).is_err());
    }
}
