//! Labeled datasets and initial-dataset builders.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndgrad::Scalar;
use rand::Rng;

use crate::error::{DcsError, Result};
use crate::oracle::Oracle;
use crate::seqcore::{hamming, Sequence, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry<T> {
    pub sequence: Sequence,
    pub score: T,
    /// Active-learning round in which the entry was added; 0 for the initial data.
    pub round: usize,
}

/// Append-only set of `(sequence, score)` pairs without duplicates.
#[derive(Clone, Debug, Default)]
pub struct LabeledDataset<T> {
    entries: Vec<Entry<T>>,
    index: HashMap<Sequence, usize>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, sequence: Sequence, score: T, round: usize) -> Result<()> {
        if !score.is_finite() {
            return Err(DcsError::NonFinite(format!("score for {sequence:?}")));
        }
        if let Some(first) = self.entries.first() {
            if sequence.len() != first.sequence.len() {
                return Err(DcsError::LengthMismatch(sequence.len(), first.sequence.len()));
            }
        }
        if self.entries.last().is_some_and(|e| e.round > round) {
            return Err(DcsError::InvalidArgument(format!(
                "round {round} added after round {}",
                self.entries.last().unwrap().round
            )));
        }
        if self.index.contains_key(&sequence) {
            return Err(DcsError::Duplicate(format!("{sequence:?}")));
        }
        self.index.insert(sequence.clone(), self.entries.len());
        self.entries.push(Entry {
            sequence,
            score,
            round,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, x: &Sequence) -> bool {
        self.index.contains_key(x)
    }

    pub fn get(&self, x: &Sequence) -> Option<&Entry<T>> {
        self.index.get(x).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[Entry<T>] {
        &self.entries
    }

    pub fn sequences(&self) -> Vec<Sequence> {
        self.entries.iter().map(|e| e.sequence.clone()).collect()
    }

    pub fn scores(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn pairs(&self) -> Vec<(Sequence, T)> {
        self.entries
            .iter()
            .map(|e| (e.sequence.clone(), e.score))
            .collect()
    }

    pub fn sequence_length(&self) -> Option<usize> {
        self.entries.first().map(|e| e.sequence.len())
    }

    /// Entries added up to and including `round`.
    pub fn up_to_round(&self, round: usize) -> Self {
        let mut out = Self::new();
        for e in self.entries.iter().take_while(|e| e.round <= round) {
            out.push(e.sequence.clone(), e.score, e.round).unwrap();
        }
        out
    }

    /// Writes `sequence,score,round` rows.
    pub fn write_csv<W: Write>(&self, w: W, vocab: &Vocabulary) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["sequence", "score", "round"])?;
        for e in &self.entries {
            wtr.write_record([
                vocab.render(&e.sequence),
                e.score.to_string(),
                e.round.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, vocab: &Vocabulary) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["sequence", "score", "round"] {
            return Err(DcsError::Malformed("dataset header must be `sequence,score,round`".into()));
        }
        let mut ds = Self::new();
        for rec in rdr.records() {
            let rec = rec?;
            let x = vocab.parse(&rec[0])?;
            let y: T = rec[1]
                .trim()
                .parse()
                .map_err(|_| DcsError::Malformed(format!("score {:?}", &rec[1])))?;
            let round: usize = rec[2]
                .trim()
                .parse()
                .map_err(|_| DcsError::Malformed(format!("round {:?}", &rec[2])))?;
            ds.push(x, y, round)?;
        }
        Ok(ds)
    }
}

/// Rejection cap for [`build_clustered_dataset`].
pub const MAX_CLUSTER_ATTEMPTS: usize = 1_000_000;

/// Collects `size` distinct neighbours of `seed` (within `max_radius` mutations,
/// excluding the seed itself) whose scores do not exceed the seed's score.
///
/// Candidates come from a single-mutation random walk that restarts at the seed
/// whenever it leaves the radius.
pub fn build_clustered_dataset<T: Scalar, O: Oracle<T> + ?Sized, R: Rng + ?Sized>(
    oracle: &O,
    seed: &Sequence,
    size: usize,
    max_radius: usize,
    rng: &mut R,
) -> Result<LabeledDataset<T>> {
    seed.validate(oracle.vocab_size(), oracle.length())?;
    if max_radius == 0 {
        return Err(DcsError::Unsatisfiable("radius 0 admits only the seed".into()));
    }
    let ceiling = oracle.evaluate(seed)?;
    let v = oracle.vocab_size();
    let mut ds = LabeledDataset::new();
    let mut rejected = std::collections::HashSet::new();
    let mut current = seed.clone();
    let mut distance = 0usize;
    let mut attempts = 0usize;
    while ds.len() < size {
        if attempts >= MAX_CLUSTER_ATTEMPTS {
            return Err(DcsError::Unsatisfiable(format!(
                "found {} of {size} sequences within radius {max_radius} after {attempts} attempts",
                ds.len()
            )));
        }
        attempts += 1;
        let pos = rng.gen_range(0..seed.len());
        let shift = rng.gen_range(1..v) as u8;
        let mut tokens = current.tokens().to_vec();
        tokens[pos] = (tokens[pos] + shift) % v as u8;
        let next = Sequence::new(tokens);
        let d = if next.tokens()[pos] == seed.tokens()[pos] {
            distance - 1
        } else if current.tokens()[pos] == seed.tokens()[pos] {
            distance + 1
        } else {
            distance
        };
        if d > max_radius {
            current = seed.clone();
            distance = 0;
            continue;
        }
        current = next;
        distance = d;
        if d == 0 || ds.contains(&current) || rejected.contains(&current) {
            continue;
        }
        let y = oracle.evaluate(&current)?;
        if y <= ceiling {
            ds.push(current.clone(), y, 0)?;
        } else {
            rejected.insert(current.clone());
        }
    }
    debug_assert!(ds
        .entries()
        .iter()
        .all(|e| hamming(&e.sequence, seed).unwrap() <= max_radius));
    Ok(ds)
}

/// Linear-interpolation percentile (numpy's default) of unsorted values.
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> Result<T> {
    if values.is_empty() {
        return Err(DcsError::Empty("percentile input"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(DcsError::InvalidArgument(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Pool entries scoring at or below the `q`-th percentile of the pool.
/// Duplicate pool sequences are kept once.
pub fn build_percentile_dataset<T: Scalar, O: Oracle<T> + ?Sized>(
    oracle: &O,
    pool: &[Sequence],
    q: f64,
) -> Result<LabeledDataset<T>> {
    if pool.is_empty() {
        return Err(DcsError::Empty("percentile pool"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(DcsError::InvalidArgument(format!("percentile {q} outside (0, 100]")));
    }
    let scores = oracle.evaluate_batch(pool)?;
    let cut = percentile(&scores, q)?;
    let mut ds = LabeledDataset::new();
    for (x, y) in pool.iter().zip(scores) {
        if y <= cut && !ds.contains(x) {
            ds.push(x.clone(), y, 0)?;
        }
    }
    if ds.is_empty() {
        return Err(DcsError::Empty("percentile dataset"));
    }
    Ok(ds)
}

/// `size` distinct uniformly random sequences.
pub fn random_pool<R: Rng + ?Sized>(
    vocab_size: usize,
    length: usize,
    size: usize,
    rng: &mut R,
) -> Result<Vec<Sequence>> {
    if (size as u128) > crate::oracle::space_size(vocab_size, length) {
        return Err(DcsError::InvalidArgument(format!(
            "cannot draw {size} distinct sequences from a space of that size"
        )));
    }
    let mut seen = std::collections::HashSet::with_capacity(size);
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let x = Sequence::new((0..length).map(|_| rng.gen_range(0..vocab_size) as u8).collect());
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{LookupOracle, NkLandscape, SequenceSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn push_rejects_duplicates_and_backwards_rounds() {
        let mut ds = LabeledDataset::<f64>::new();
        let x = Sequence::new(vec![0, 1]);
        ds.push(x.clone(), 0.5, 1).unwrap();
        assert!(matches!(ds.push(x, 0.5, 1), Err(DcsError::Duplicate(_))));
        assert!(ds.push(Sequence::new(vec![1, 1]), 0.1, 0).is_err());
        assert!(ds.push(Sequence::new(vec![1, 1, 1]), 0.1, 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let v = Vocabulary::dna();
        let mut ds = LabeledDataset::<f64>::new();
        ds.push(v.parse("ACGT").unwrap(), 0.1 + 0.2, 0).unwrap();
        ds.push(v.parse("TTTT").unwrap(), 1.0 / 3.0, 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, &v).unwrap();
        let back = LabeledDataset::<f64>::read_csv(buf.as_slice(), &v).unwrap();
        assert_eq!(back.entries(), ds.entries());
    }

    #[test]
    fn percentile_examples() {
        let pool: Vec<Sequence> = (0..10u8).map(|i| Sequence::new(vec![i])).collect();
        let oracle = LookupOracle::new(
            1,
            10,
            pool.iter().enumerate().map(|(i, x)| (x.clone(), (i + 1) as f64 / 10.0)),
            None,
        )
        .unwrap();
        let half = build_percentile_dataset(&oracle, &pool, 50.0).unwrap();
        assert_eq!(half.len(), 5);
        assert!(half.scores().iter().all(|&y| y <= 0.5));
        assert_eq!(build_percentile_dataset(&oracle, &pool, 100.0).unwrap().len(), 10);
        assert!(build_percentile_dataset(&oracle, &[], 50.0).is_err());
    }

    #[test]
    fn clustered_dataset_respects_constraints() {
        let nk = NkLandscape::<f64>::new(8, 4, 2, 3).unwrap();
        let mut scored: Vec<(Sequence, f64)> = SequenceSpace::new(4, 8, 1 << 16)
            .unwrap()
            .map(|x| {
                let y = nk.evaluate(&x).unwrap();
                (x, y)
            })
            .collect();
        scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let seed = scored[(0.8 * scored.len() as f64) as usize].0.clone();
        let ceiling = nk.evaluate(&seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = build_clustered_dataset(&nk, &seed, 300, 3, &mut rng).unwrap();
        assert_eq!(ds.len(), 300);
        for e in ds.entries() {
            assert!(e.score <= ceiling);
            assert!((1..=3).contains(&hamming(&e.sequence, &seed).unwrap()));
        }

        // The global minimum has no neighbour scoring at or below it.
        let worst = scored[0].0.clone();
        let err = build_clustered_dataset(&nk, &worst, 10, 2, &mut rng).unwrap_err();
        assert!(matches!(err, DcsError::Unsatisfiable(_)));
    }
}
