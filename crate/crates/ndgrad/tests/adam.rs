use ndgrad::{Adam, Checkpoint, Graph, ParamStore, Tensor};
use proptest::prelude::*;

fn quadratic_step(store: &mut ParamStore<f64>, adam: &mut Adam<f64>) {
    let id = store.find("w").unwrap();
    let mut g = Graph::new();
    let w = g.param(store, id).unwrap();
    let y = g.square(w).unwrap();
    let loss = g.sum(y).unwrap();
    let grads = g.backward(loss).unwrap();
    store.zero_grads();
    store.accumulate(&grads);
    adam.step(store).unwrap();
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut store = ParamStore::new();
    store.add("w", Tensor::from_vec(1, 3, vec![0.5f64, -2.0, 7.0]).unwrap()).unwrap();
    let before = store.params()[0].value.clone();
    let mut adam = Adam::new(&store, 0.1);
    for _ in 0..5 {
        adam.step(&mut store).unwrap();
    }
    assert_eq!(store.params()[0].value, before);
    assert_eq!(adam.steps(), 5);
}

#[test]
fn constant_gradient_moves_against_its_sign() {
    for g in [0.3f64, -4.0] {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::scalar(1.0f64)).unwrap();
        let mut adam = Adam::new(&store, 0.01);
        let mut prev = 1.0;
        for _ in 0..100 {
            // loss = g * w has constant gradient g
            let mut gg = Graph::new();
            let w = gg.param(&store, id).unwrap();
            let lin = gg.scale(w, g).unwrap();
            let grads = gg.backward(lin).unwrap();
            store.zero_grads();
            store.accumulate(&grads);
            adam.step(&mut store).unwrap();
            let now = store.value(id).item();
            assert!((now - prev) * g < 0.0);
            prev = now;
        }
    }
}

#[test]
fn ten_step_trace_matches_reference() {
    // f(w) = w^2, w0 = 1.0, lr = 0.1, scripted independently of the optimizer.
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
    let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    let mut expected = Vec::new();
    for t in 1..=10 {
        let g = 2.0 * w;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        w -= lr * mh / (vh.sqrt() + eps);
        expected.push(w);
    }

    let mut store = ParamStore::new();
    store.add("w", Tensor::scalar(1.0f64)).unwrap();
    let mut adam = Adam::new(&store, lr);
    for e in expected {
        quadratic_step(&mut store, &mut adam);
        let got = store.params()[0].value.item();
        assert!((got - e).abs() <= 1e-15, "{got} vs {e}");
    }
}

#[test]
fn separate_learning_rate_group() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::scalar(1.0f64)).unwrap();
    let b = store.add("b", Tensor::scalar(1.0f64)).unwrap();
    let mut adam = Adam::new(&store, 1e-3);
    adam.set_lr(b, 1e-1);
    let mut g = Graph::new();
    let (av, bv) = (g.param(&store, a).unwrap(), g.param(&store, b).unwrap());
    let s = g.add(av, bv).unwrap();
    let grads = g.backward(s).unwrap();
    store.accumulate(&grads);
    adam.step(&mut store).unwrap();
    // First Adam step moves each parameter by its learning rate.
    assert!((store.value(a).item() - (1.0 - 1e-3)).abs() < 1e-9);
    assert!((store.value(b).item() - (1.0 - 1e-1)).abs() < 1e-9);
}

#[test]
fn optimizer_state_survives_checkpoint() {
    let mut store = ParamStore::new();
    store.add("w", Tensor::scalar(1.0f64)).unwrap();
    let mut adam = Adam::new(&store, 0.05);
    for _ in 0..3 {
        quadratic_step(&mut store, &mut adam);
    }
    let mut ckpt = Checkpoint::from_store(&store);
    ckpt.tensors.extend(adam.export(&store));
    let mut buf = Vec::new();
    ckpt.write_to(&mut buf).unwrap();
    let back = Checkpoint::<f64>::read_from(buf.as_slice()).unwrap();

    let mut store2 = ParamStore::new();
    store2.add("w", Tensor::scalar(0.0f64)).unwrap();
    back.load_into(&mut store2).unwrap();
    let mut adam2 = Adam::new(&store2, 0.05);
    adam2.import(&store2, 3, |n| back.get(n).cloned()).unwrap();

    for _ in 0..4 {
        quadratic_step(&mut store, &mut adam);
        quadratic_step(&mut store2, &mut adam2);
    }
    assert_eq!(store.params()[0].value.item().to_bits(), store2.params()[0].value.item().to_bits());
}

proptest! {
    #[test]
    fn checkpoint_round_trip_is_lossless(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
        let mut store = ParamStore::new();
        let n = values.len();
        store.add("layer.weight", Tensor::from_vec(1, n, values).unwrap()).unwrap();
        let mut ckpt = Checkpoint::from_store(&store);
        ckpt.meta.insert("step".into(), "12".into());
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let back = Checkpoint::<f64>::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.meta.get("step").map(String::as_str), Some("12"));
        let a = ckpt.get("layer.weight").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let b = back.get("layer.weight").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn checkpoint_rejects_bad_header() {
    assert!(Checkpoint::<f64>::read_from("not a checkpoint\n".as_bytes()).is_err());
}
