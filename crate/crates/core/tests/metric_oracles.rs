//! Sequence metrics checked against brute-force recomputations.

use dcs_core::seqcore::{diversity, hamming, metrics_record, novelty, spearman, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut ChaCha8Rng, n: usize, l: usize, v: u8) -> Vec<Sequence> {
    (0..n)
        .map(|_| Sequence::new((0..l).map(|_| rng.gen_range(0..v)).collect()))
        .collect()
}

fn naive_distance(a: &Sequence, b: &Sequence) -> usize {
    a.tokens().iter().zip(b.tokens()).filter(|(x, y)| x != y).count()
}

fn naive_diversity(set: &[Sequence]) -> f64 {
    let mut total = 0usize;
    for i in 0..set.len() {
        for j in 0..set.len() {
            if i != j {
                total += naive_distance(&set[i], &set[j]);
            }
        }
    }
    total as f64 / (set.len() * (set.len() - 1)) as f64
}

fn naive_novelty(set: &[Sequence], reference: &[Sequence]) -> f64 {
    let total: usize = set
        .iter()
        .map(|x| reference.iter().map(|r| naive_distance(x, r)).min().unwrap())
        .sum();
    total as f64 / set.len() as f64
}

/// Ranks with ties averaged, then Pearson on the ranks.
fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn diversity_and_novelty_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let n = rng.gen_range(2..30);
        let set = random_set(&mut rng, n, 9, 4);
        let m = rng.gen_range(1..20);
        let reference = random_set(&mut rng, m, 9, 4);
        let d = diversity(&set).unwrap();
        let nv = novelty(&set, &reference).unwrap();
        assert!((d - naive_diversity(&set)).abs() < 1e-12, "trial {trial}");
        assert!((nv - naive_novelty(&set, &reference)).abs() < 1e-12, "trial {trial}");
        assert_eq!(hamming(&set[0], &set[1]).unwrap(), naive_distance(&set[0], &set[1]));
    }
}

#[test]
fn spearman_matches_rank_then_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = rng.gen_range(3..60);
        // Coarse values force ties.
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-3.0..3.0f64).round()).collect();
        if a.iter().all(|x| *x == a[0]) || b.iter().all(|x| *x == b[0]) {
            continue;
        }
        assert!((spearman(&a, &b).unwrap() - naive_spearman(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn metrics_record_uses_the_k_best() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let set = random_set(&mut rng, 40, 6, 4);
    let entries: Vec<(Sequence, f64)> = set.iter().map(|x| (x.clone(), rng.gen::<f64>())).collect();
    let reference = random_set(&mut rng, 10, 6, 4);
    let k = 7;
    let mut sorted = entries.clone();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let top: Vec<Sequence> = sorted[..k].iter().map(|e| e.0.clone()).collect();
    let scores: Vec<f64> = sorted[..k].iter().map(|e| e.1).collect();
    let m = metrics_record(&entries, k, &reference).unwrap();
    assert_eq!(m.max, scores[0]);
    assert_eq!(m.median, scores[3]);
    assert!((m.mean - scores.iter().sum::<f64>() / k as f64).abs() < 1e-15);
    assert!((m.diversity - naive_diversity(&top)).abs() < 1e-12);
    assert!((m.novelty - naive_novelty(&top, &reference)).abs() < 1e-12);
}
