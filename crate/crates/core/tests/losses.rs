//! Training objectives checked against direct formulas.

use dcs_core::gfnpolicy::{tb_loss, vargrad_loss, PolicyConfig, PolicyModel};
use dcs_core::seqcore::Sequence;
use ndgrad::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (PolicyModel<f64>, Vec<Sequence>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = PolicyConfig { hidden: 8, layers: 2, embedding: 4, ..PolicyConfig::default() };
    let policy = PolicyModel::new(&cfg, 5, 4, &mut rng).unwrap();
    let xs: Vec<Sequence> = (0..9)
        .map(|_| Sequence::new((0..5).map(|_| rng.gen_range(0..4)).collect()))
        .collect();
    let log_r: Vec<f64> = (0..9).map(|_| rng.gen_range(-4.0..2.0)).collect();
    (policy, xs, log_r)
}

#[test]
fn tb_log_z_gradient_is_twice_the_mean_residual() {
    for seed in 0..5 {
        let (policy, xs, log_r) = setup(seed);
        let log_pf = policy.log_probs(&xs).unwrap();
        let z = policy.log_z();
        let residuals: Vec<f64> = log_pf.iter().zip(&log_r).map(|(p, r)| z + p - r).collect();
        let mut g = Graph::new();
        let loss = tb_loss(&mut g, &policy, &xs, &log_r).unwrap();
        let expected_loss = residuals.iter().map(|r| r * r).sum::<f64>() / 9.0;
        assert!((g.value(loss).item() - expected_loss).abs() < 1e-10);
        let grads = g.backward(loss).unwrap();
        let dz = grads.get(policy.log_z_id()).unwrap().item();
        let expected = 2.0 * residuals.iter().sum::<f64>() / 9.0;
        assert!((dz - expected).abs() < 1e-10, "seed {seed}: {dz} vs {expected}");
    }
}

#[test]
fn vargrad_matches_two_pass_variance() {
    for seed in 0..5 {
        let (policy, xs, log_r) = setup(seed + 10);
        let log_pf = policy.log_probs(&xs).unwrap();
        let d: Vec<f64> = log_r.iter().zip(&log_pf).map(|(r, p)| r - p).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let mut g = Graph::new();
        let loss = vargrad_loss(&mut g, &policy, &xs, &log_r).unwrap();
        assert!((g.value(loss).item() - var).abs() < 1e-10);
        // Independent of log Z.
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(policy.log_z_id()).map_or(0.0, |t| t.item()).abs() < 1e-15);
    }
}
