use ndgrad::gradcheck::{check, layer_cases};
use ndgrad::{GradError, Graph, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn square_gradient_at_three_is_six() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(3.0f64)).unwrap();
    let mut g = Graph::new();
    let wv = g.param(&store, w).unwrap();
    let y = g.square(wv).unwrap();
    let loss = g.sum(y).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap().item(), 6.0);
}

#[test]
fn constant_loss_has_zero_gradient() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(3.0f64)).unwrap();
    let mut g = Graph::new();
    let wv = g.param(&store, w).unwrap();
    let zero = g.scale(wv, 0.0).unwrap();
    let c = g.constant(Tensor::scalar(5.0)).unwrap();
    let loss = g.add(zero, c).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap().item(), 0.0);
}

#[test]
fn backward_twice_is_an_error() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(1.0f64)).unwrap();
    let mut g = Graph::new();
    let wv = g.param(&store, w).unwrap();
    let loss = g.square(wv).unwrap();
    g.backward(loss).unwrap();
    assert!(matches!(g.backward(loss), Err(GradError::GraphConsumed)));
    assert!(g.is_empty());
}

#[test]
fn non_finite_values_are_rejected() {
    let mut g = Graph::<f64>::new();
    let big = g.constant(Tensor::scalar(1e200)).unwrap();
    assert!(matches!(g.square(big), Err(GradError::NonFinite(_))));
    assert!(g.constant(Tensor::scalar(f64::NAN)).is_err());
}

#[test]
fn log_softmax_of_uniform_logits() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::full(2, 5, 0.3)).unwrap();
    let y = g.log_softmax(x).unwrap();
    for &v in g.value(y).data() {
        assert!((v + 5f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn log_softmax_rows_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let data: Vec<f64> = (0..12).map(|_| rand::Rng::gen_range(&mut rng, -30.0..30.0)).collect();
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_vec(3, 4, data).unwrap()).unwrap();
        let y = g.log_softmax(x).unwrap();
        for r in 0..3 {
            let s: f64 = g.value(y).row(r).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn every_layer_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        for case in layer_cases(&mut rng) {
            let err = check(&case, 1e-5).unwrap();
            assert!(err <= 1e-4, "{} trial {trial}: relative error {err:e}", case.name);
        }
    }
}

#[test]
fn shared_parameter_gradients_accumulate() {
    // y = w * w through two separate leaf registrations.
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(1.5f64)).unwrap();
    let mut g = Graph::new();
    let a = g.param(&store, w).unwrap();
    let b = g.param(&store, w).unwrap();
    let y = g.mul(a, b).unwrap();
    let grads = g.backward(y).unwrap();
    assert_eq!(grads.get(w).unwrap().item(), 3.0);
}
