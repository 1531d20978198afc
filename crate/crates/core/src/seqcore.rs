//! Vocabulary, fixed-length sequences, and evaluation metrics.

use std::cmp::Ordering;
use std::fmt;

use ndgrad::Scalar;

use crate::error::{DcsError, Result};

pub type Token = u8;

/// Display alphabet; token ids are positions in `symbols`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<char>,
}

impl Vocabulary {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.len() < 2 {
            return Err(DcsError::InvalidVocabulary("need at least two symbols".into()));
        }
        if symbols.len() > Token::MAX as usize {
            return Err(DcsError::InvalidVocabulary("too many symbols".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(DcsError::InvalidVocabulary(format!("repeated symbol {c:?}")));
            }
            if c.is_whitespace() || *c == ',' {
                return Err(DcsError::InvalidVocabulary(format!("unusable symbol {c:?}")));
            }
        }
        Ok(Self { symbols })
    }

    pub fn dna() -> Self {
        Self::new("ACGT").unwrap()
    }

    pub fn protein() -> Self {
        Self::new("ACDEFGHIKLMNPQRSTVWY").unwrap()
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> String {
        self.symbols.iter().collect()
    }

    pub fn token(&self, c: char) -> Option<Token> {
        self.symbols.iter().position(|&s| s == c).map(|p| p as Token)
    }

    pub fn parse(&self, text: &str) -> Result<Sequence> {
        text.trim()
            .chars()
            .map(|c| {
                self.token(c)
                    .ok_or_else(|| DcsError::InvalidToken(format!("{c:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Sequence)
    }

    pub fn render(&self, x: &Sequence) -> String {
        x.0.iter().map(|&t| self.symbols[t as usize]).collect()
    }
}

/// Fixed-length token string. Ordering is lexicographic by token id.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<Token>);

impl Sequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self(tokens)
    }

    /// Checks every token against a vocabulary size and an expected length.
    pub fn checked(tokens: Vec<Token>, vocab_size: usize, length: usize) -> Result<Self> {
        let x = Self(tokens);
        x.validate(vocab_size, length)?;
        Ok(x)
    }

    pub fn validate(&self, vocab_size: usize, length: usize) -> Result<()> {
        if self.0.len() != length {
            return Err(DcsError::LengthMismatch(self.0.len(), length));
        }
        if let Some(t) = self.0.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(DcsError::InvalidToken(format!("token id {t} >= {vocab_size}")));
        }
        Ok(())
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence{:?}", self.0)
    }
}

/// A sequence with some slots replaced by the mask sentinel (`None`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedSequence {
    slots: Vec<Option<Token>>,
}

impl MaskedSequence {
    pub fn new(slots: Vec<Option<Token>>) -> Self {
        Self { slots }
    }

    pub fn unmasked(x: &Sequence) -> Self {
        Self {
            slots: x.0.iter().map(|&t| Some(t)).collect(),
        }
    }

    pub fn fully_masked(length: usize) -> Self {
        Self {
            slots: vec![None; length],
        }
    }

    pub fn slots(&self) -> &[Option<Token>] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.slots[i].is_none()
    }

    pub fn mask_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }
}

pub fn hamming(a: &Sequence, b: &Sequence) -> Result<usize> {
    if a.len() != b.len() {
        return Err(DcsError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

fn desc<T: Scalar>(a: &T, b: &T) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopKStats<T> {
    pub max: T,
    pub median: T,
    pub mean: T,
    /// The list held fewer than K scores; statistics cover the full list.
    pub truncated: bool,
}

/// Max, median and mean of the `k` largest scores.
pub fn top_k_stats<T: Scalar>(scores: &[T], k: usize) -> Result<TopKStats<T>> {
    if scores.is_empty() || k == 0 {
        return Err(DcsError::Empty("top-k scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(desc);
    let truncated = k > sorted.len();
    sorted.truncate(k);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0)
    };
    let mean = sorted.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
    Ok(TopKStats {
        max: sorted[0],
        median,
        mean,
        truncated,
    })
}

/// Mean pairwise Hamming distance over unordered pairs.
pub fn diversity(set: &[Sequence]) -> Result<f64> {
    if set.len() < 2 {
        return Err(DcsError::InvalidArgument("diversity needs at least two sequences".into()));
    }
    let mut total = 0usize;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            total += hamming(&set[i], &set[j])?;
        }
    }
    let pairs = set.len() * (set.len() - 1) / 2;
    Ok(total as f64 / pairs as f64)
}

/// Mean over `set` of the distance to the nearest reference sequence.
pub fn novelty(set: &[Sequence], reference: &[Sequence]) -> Result<f64> {
    if reference.is_empty() {
        return Err(DcsError::Empty("novelty reference"));
    }
    if set.is_empty() {
        return Err(DcsError::Empty("novelty set"));
    }
    let mut total = 0usize;
    for x in set {
        let mut best = usize::MAX;
        for r in reference {
            best = best.min(hamming(x, r)?);
            if best == 0 {
                break;
            }
        }
        total += best;
    }
    Ok(total as f64 / set.len() as f64)
}

/// Ranks starting at 1, ties receiving the average of the ranks they span.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DcsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(DcsError::InvalidArgument("spearman needs at least two pairs".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 {
        return Err(DcsError::ZeroVariance("first ranking"));
    }
    if sbb == 0.0 {
        return Err(DcsError::ZeroVariance("second ranking"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Score statistics of a Top-K set plus its diversity and novelty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord<T> {
    pub max: T,
    pub median: T,
    pub mean: T,
    pub diversity: f64,
    pub novelty: f64,
}

/// Metrics over the `k` best `(sequence, score)` pairs. Ties keep input order.
/// Diversity is zero for a single-element set.
pub fn metrics_record<T: Scalar>(
    entries: &[(Sequence, T)],
    k: usize,
    reference: &[Sequence],
) -> Result<MetricsRecord<T>> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&i, &j| desc(&entries[i].1, &entries[j].1));
    order.truncate(k);
    let scores: Vec<T> = order.iter().map(|&i| entries[i].1).collect();
    let stats = top_k_stats(&scores, k)?;
    let top: Vec<Sequence> = order.iter().map(|&i| entries[i].0.clone()).collect();
    let diversity = if top.len() >= 2 { diversity(&top)? } else { 0.0 };
    Ok(MetricsRecord {
        max: stats.max,
        median: stats.median,
        mean: stats.mean,
        diversity,
        novelty: novelty(&top, reference)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dna(s: &str) -> Sequence {
        Vocabulary::dna().parse(s).unwrap()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&dna("ACGT"), &dna("ACGA")).unwrap(), 1);
        assert_eq!(hamming(&dna("ACGT"), &dna("ACGT")).unwrap(), 0);
        assert_eq!(hamming(&dna("AAAA"), &dna("CCCC")).unwrap(), 4);
        assert!(hamming(&dna("AAAA"), &dna("AAA")).is_err());
    }

    #[test]
    fn top_k_examples() {
        let s = top_k_stats(&[0.9f64, 0.5, 0.1], 2).unwrap();
        assert_eq!(s.max, 0.9);
        assert!((s.median - 0.7).abs() < 1e-15);
        assert!((s.mean - 0.7).abs() < 1e-15);
        assert!(!s.truncated);

        let c = top_k_stats(&[0.25f64; 3], 3).unwrap();
        assert_eq!((c.max, c.median, c.mean), (0.25, 0.25, 0.25));

        let t = top_k_stats(&[1.0, 2.0], 5).unwrap();
        assert!(t.truncated);
        assert_eq!(t.median, 1.5);
        assert!(top_k_stats::<f64>(&[], 1).is_err());
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity(&[dna("ACGT"), dna("ACGT"), dna("ACGT")]).unwrap(), 0.0);
        assert_eq!(diversity(&[dna("AAAA"), dna("CCCC")]).unwrap(), 4.0);
        assert!(diversity(&[dna("AAAA")]).is_err());
    }

    #[test]
    fn novelty_examples() {
        let reference = vec![dna("AAAAAAAA"), dna("CCCCCCCC")];
        assert_eq!(novelty(&[dna("AAAAAAAA")], &reference).unwrap(), 0.0);
        assert_eq!(novelty(&[dna("AAAAAGGG")], &reference).unwrap(), 3.0);
        assert!(novelty(&[dna("AAAAAAAA")], &[]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            spearman(&a, &[2.0; 5]),
            Err(DcsError::ZeroVariance(_))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn vocabulary_round_trip_and_rejections() {
        let v = Vocabulary::dna();
        assert_eq!(v.render(&v.parse("ACGTTGCA").unwrap()), "ACGTTGCA");
        assert!(v.parse("ACGX").is_err());
        assert!(Vocabulary::new("A").is_err());
        assert!(Vocabulary::new("AAB").is_err());
    }

    #[test]
    fn metrics_record_on_small_set() {
        let entries = vec![(dna("AAAA"), 0.1f64), (dna("CCCC"), 0.9), (dna("CCCA"), 0.8)];
        let m = metrics_record(&entries, 2, &[dna("AAAA")]).unwrap();
        assert_eq!(m.max, 0.9);
        assert!((m.mean - 0.85).abs() < 1e-12);
        assert_eq!(m.diversity, 1.0);
        assert_eq!(m.novelty, 3.5);
    }
}
