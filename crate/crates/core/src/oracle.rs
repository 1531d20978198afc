//! Ground-truth score functions.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;

use ndgrad::Scalar;
use rand::seq::index::sample;
use rand::Rng as _;

use crate::error::{DcsError, Result};
use crate::seeds::rng_from;
use crate::seqcore::{Sequence, Token, Vocabulary};

/// Default bound on `|V|^L` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1 << 24;

/// Black-box score function over fixed-length sequences.
pub trait Oracle<T: Scalar>: Send + Sync {
    fn length(&self) -> usize;
    fn vocab_size(&self) -> usize;
    fn evaluate(&self, x: &Sequence) -> Result<T>;

    fn evaluate_batch(&self, xs: &[Sequence]) -> Result<Vec<T>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<T: Scalar, O: Oracle<T> + ?Sized> Oracle<T> for Box<O> {
    fn length(&self) -> usize {
        (**self).length()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn evaluate(&self, x: &Sequence) -> Result<T> {
        (**self).evaluate(x)
    }
}

impl<T: Scalar, O: Oracle<T> + ?Sized> Oracle<T> for Arc<O> {
    fn length(&self) -> usize {
        (**self).length()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn evaluate(&self, x: &Sequence) -> Result<T> {
        (**self).evaluate(x)
    }
}

/// Table of measured scores, e.g. an exhaustively characterized library.
#[derive(Clone, Debug)]
pub struct LookupOracle<T> {
    length: usize,
    vocab_size: usize,
    table: HashMap<Sequence, T>,
    default: Option<T>,
}

impl<T: Scalar> LookupOracle<T> {
    pub fn new(
        length: usize,
        vocab_size: usize,
        rows: impl IntoIterator<Item = (Sequence, T)>,
        default: Option<T>,
    ) -> Result<Self> {
        let mut table = HashMap::new();
        for (x, y) in rows {
            x.validate(vocab_size, length)?;
            if !y.is_finite() {
                return Err(DcsError::NonFinite(format!("lookup score for {x:?}")));
            }
            table.insert(x, y);
        }
        Ok(Self {
            length,
            vocab_size,
            table,
            default,
        })
    }

    /// Reads a `sequence,score` CSV. The sequence length is taken from the first row.
    pub fn from_csv<R: Read>(reader: R, vocab: &Vocabulary, default: Option<T>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "sequence" || &headers[1] != "score" {
            return Err(DcsError::Malformed(format!(
                "lookup header must be `sequence,score`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let x = vocab.parse(&rec[0])?;
            let y: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| DcsError::Malformed(format!("score {:?}", &rec[1])))?;
            rows.push((x, T::lit(y)));
        }
        let length = rows
            .first()
            .map(|(x, _)| x.len())
            .ok_or(DcsError::Empty("lookup table"))?;
        Self::new(length, vocab.size(), rows, default)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<T: Scalar> Oracle<T> for LookupOracle<T> {
    fn length(&self) -> usize {
        self.length
    }
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn evaluate(&self, x: &Sequence) -> Result<T> {
        x.validate(self.vocab_size, self.length)?;
        self.table
            .get(x)
            .copied()
            .or(self.default)
            .ok_or_else(|| DcsError::LookupMiss(format!("{x:?}")))
    }
}

/// NK fitness landscape: site `i` contributes a uniform `[0, 1)` value looked up
/// from its own token and the tokens at `k` other sites; the score is the mean
/// contribution.
#[derive(Clone, Debug)]
pub struct NkLandscape<T> {
    length: usize,
    vocab_size: usize,
    k: usize,
    seed: u64,
    neighbors: Vec<Vec<usize>>,
    tables: Vec<Vec<T>>,
}

impl<T: Scalar> NkLandscape<T> {
    pub fn new(length: usize, vocab_size: usize, k: usize, seed: u64) -> Result<Self> {
        if length == 0 || k >= length {
            return Err(DcsError::InvalidArgument(format!(
                "NK landscape needs 0 <= K < L, got K={k}, L={length}"
            )));
        }
        if vocab_size < 2 {
            return Err(DcsError::InvalidArgument("vocabulary size below 2".into()));
        }
        let table_len = (vocab_size as u64)
            .checked_pow(k as u32 + 1)
            .filter(|&n| n <= 1 << 26)
            .ok_or_else(|| DcsError::InvalidArgument("contribution table too large".into()))?
            as usize;
        let mut rng = rng_from(seed, &[]);
        let mut neighbors = Vec::with_capacity(length);
        for site in 0..length {
            let mut others: Vec<usize> = sample(&mut rng, length - 1, k)
                .into_iter()
                .map(|j| if j >= site { j + 1 } else { j })
                .collect();
            others.sort_unstable();
            neighbors.push(others);
        }
        let tables = (0..length)
            .map(|_| (0..table_len).map(|_| T::lit(rng.gen::<f64>())).collect())
            .collect();
        Ok(Self {
            length,
            vocab_size,
            k,
            seed,
            neighbors,
            tables,
        })
    }

    pub fn epistasis(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    /// Contribution of `site` given the full sequence.
    pub fn contribution(&self, site: usize, tokens: &[Token]) -> T {
        let v = self.vocab_size;
        let mut idx = tokens[site] as usize;
        for &j in &self.neighbors[site] {
            idx = idx * v + tokens[j] as usize;
        }
        self.tables[site][idx]
    }
}

impl<T: Scalar> Oracle<T> for NkLandscape<T> {
    fn length(&self) -> usize {
        self.length
    }
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn evaluate(&self, x: &Sequence) -> Result<T> {
        x.validate(self.vocab_size, self.length)?;
        let total: T = (0..self.length)
            .map(|i| self.contribution(i, x.tokens()))
            .sum();
        Ok(total / T::from_usize(self.length).unwrap())
    }
}

/// Zeroes every score below `threshold`.
#[derive(Clone, Debug)]
pub struct HardVariant<T, O> {
    pub inner: O,
    pub threshold: T,
}

/// Threshold used by the hard benchmark variant.
pub const HARD_THRESHOLD: f64 = 0.3;

impl<T: Scalar, O: Oracle<T>> HardVariant<T, O> {
    pub fn new(inner: O, threshold: T) -> Self {
        Self { inner, threshold }
    }
}

impl<T: Scalar, O: Oracle<T>> Oracle<T> for HardVariant<T, O> {
    fn length(&self) -> usize {
        self.inner.length()
    }
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }
    fn evaluate(&self, x: &Sequence) -> Result<T> {
        let y = self.inner.evaluate(x)?;
        Ok(if y >= self.threshold { y } else { T::zero() })
    }
}

/// Every sequence of `V^L` in lexicographic token order.
#[derive(Clone, Debug)]
pub struct SequenceSpace {
    vocab_size: usize,
    next: Option<Vec<Token>>,
    remaining: u64,
}

impl SequenceSpace {
    pub fn new(vocab_size: usize, length: usize, limit: u64) -> Result<Self> {
        let size = space_size(vocab_size, length);
        if size > limit as u128 {
            return Err(DcsError::SpaceTooLarge(size, limit));
        }
        Ok(Self {
            vocab_size,
            next: Some(vec![0; length]),
            remaining: size as u64,
        })
    }
}

impl Iterator for SequenceSpace {
    type Item = Sequence;

    fn next(&mut self) -> Option<Sequence> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for t in succ.iter_mut().rev() {
            if (*t as usize) + 1 < self.vocab_size {
                *t += 1;
                carry = false;
                break;
            }
            *t = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        self.remaining -= 1;
        Some(Sequence::new(current))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

impl ExactSizeIterator for SequenceSpace {}

pub fn space_size(vocab_size: usize, length: usize) -> u128 {
    (vocab_size as u128).saturating_pow(length as u32)
}

/// Lazily scores every sequence of the oracle's space in lexicographic order.
pub fn enumerate_space<'a, T: Scalar, O: Oracle<T> + ?Sized>(
    oracle: &'a O,
    limit: u64,
) -> Result<impl Iterator<Item = Result<(Sequence, T)>> + 'a> {
    let space = SequenceSpace::new(oracle.vocab_size(), oracle.length(), limit)?;
    Ok(space.map(move |x| oracle.evaluate(&x).map(|y| (x, y))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_reads_table_and_default() {
        let v = Vocabulary::dna();
        let csv = "sequence,score\nACGTACGT,0.75\nAAAAAAAA,0.1\n";
        let o = LookupOracle::<f64>::from_csv(csv.as_bytes(), &v, None).unwrap();
        assert_eq!(o.evaluate(&v.parse("ACGTACGT").unwrap()).unwrap(), 0.75);
        assert!(matches!(
            o.evaluate(&v.parse("CCCCCCCC").unwrap()),
            Err(DcsError::LookupMiss(_))
        ));
        let o = LookupOracle::<f64>::from_csv(csv.as_bytes(), &v, Some(0.0)).unwrap();
        assert_eq!(o.evaluate(&v.parse("CCCCCCCC").unwrap()).unwrap(), 0.0);
        assert!(LookupOracle::<f64>::from_csv("seq,y\nAC,1\n".as_bytes(), &v, None).is_err());
    }

    #[test]
    fn hard_variant_thresholds() {
        let v = Vocabulary::dna();
        let x = v.parse("ACGT").unwrap();
        let low = LookupOracle::new(4, 4, [(x.clone(), 0.25f64)], None).unwrap();
        assert_eq!(HardVariant::new(low, 0.3).evaluate(&x).unwrap(), 0.0);
        let high = LookupOracle::new(4, 4, [(x.clone(), 0.3f64)], None).unwrap();
        assert_eq!(HardVariant::new(high, 0.3).evaluate(&x).unwrap(), 0.3);
    }

    #[test]
    fn nk_with_zero_epistasis_is_mean_of_site_tables() {
        let nk = NkLandscape::<f64>::new(6, 3, 0, 5).unwrap();
        let x = Sequence::new(vec![0, 2, 1, 1, 0, 2]);
        let expected: f64 = x
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, &t)| nk.tables[i][t as usize])
            .sum::<f64>()
            / 6.0;
        assert_eq!(nk.evaluate(&x).unwrap(), expected);
    }

    #[test]
    fn nk_rejects_bad_params_and_is_seeded() {
        assert!(NkLandscape::<f64>::new(4, 4, 4, 0).is_err());
        let a = NkLandscape::<f64>::new(8, 4, 3, 9).unwrap();
        let b = NkLandscape::<f64>::new(8, 4, 3, 9).unwrap();
        for x in SequenceSpace::new(4, 8, 1 << 16).unwrap().step_by(97) {
            assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
        }
        for site in 0..8 {
            assert_eq!(a.neighbors(site).len(), 3);
            assert!(!a.neighbors(site).contains(&site));
        }
    }

    #[test]
    fn space_enumeration_order_and_size() {
        let v = Vocabulary::new("AB").unwrap();
        let all: Vec<String> = SequenceSpace::new(2, 3, 100)
            .unwrap()
            .map(|x| v.render(&x))
            .collect();
        assert_eq!(all, ["AAA", "AAB", "ABA", "ABB", "BAA", "BAB", "BBA", "BBB"]);
        assert_eq!(SequenceSpace::new(4, 8, DEFAULT_ENUMERATION_LIMIT).unwrap().count(), 65_536);
        assert!(matches!(
            SequenceSpace::new(20, 10, DEFAULT_ENUMERATION_LIMIT),
            Err(DcsError::SpaceTooLarge(..))
        ));
    }
}
