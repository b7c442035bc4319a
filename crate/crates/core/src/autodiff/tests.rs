use proptest::prelude::*;

use super::*;

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

#[test]
fn identity_1x1_conv_passes_input_through() {
    let mut g = Graph::<f64>::new();
    let xv = Tensor::from_fn(&[2, 3, 4, 5], |i| (i as f64 * 0.37).sin());
    let x = g.constant(xv.clone()).unwrap();
    let w = g
        .constant(Tensor::from_fn(&[3, 3, 1, 1], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 }))
        .unwrap();
    let y = g.conv2d(x, w, None, Conv2dSpec::default()).unwrap();
    assert_eq!(g.value(y), &xv);
}

#[test]
fn ones_kernel_counts_neighbours() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::full(&[1, 1, 5, 5], 1.0)).unwrap();
    let w = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0)).unwrap();
    let y = g.conv2d(x, w, None, Conv2dSpec::padded(1, 1)).unwrap();
    let v = g.value(y).data();
    assert_eq!(v[2 * 5 + 2], 9.0);
    assert_eq!(v[0], 4.0);
    assert_eq!(v[4], 4.0);
    assert_eq!(v[24], 4.0);
    assert_eq!(v[2], 6.0);
}

#[test]
fn every_op_passes_gradient_check() {
    let cfg = GradCheckConfig::default();
    for seed in 0..5 {
        for (name, rep) in suite::run_op_suite(seed, &cfg).unwrap() {
            assert!(
                rep.max_rel_error < 1e-4,
                "{name} seed {seed}: {} at {:?}",
                rep.max_rel_error,
                rep.worst
            );
        }
    }
}

#[test]
fn unmasked_softmax_is_plain_softmax() {
    let xv = t(&[2, 3], &[0.5, -1.0, 2.0, 3.0, 3.0, -7.0]);
    let mut g = Graph::<f64>::new();
    let x = g.constant(xv.clone()).unwrap();
    let zero = Tensor::zeros(&[2, 3]);
    let y = g.softmax_masked(x, Some(&zero)).unwrap();
    let plain = g.softmax_masked(x, None).unwrap();
    for (r, row) in xv.data().chunks(3).enumerate() {
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        for j in 0..3 {
            let want = row[j].exp() / z;
            assert!((g.value(y).data()[r * 3 + j] - want).abs() < 1e-15);
        }
    }
    assert_eq!(g.value(y), g.value(plain));
}

#[test]
fn single_admitted_entry_gives_one_hot() {
    let ninf = f64::NEG_INFINITY;
    let mut g = Graph::<f64>::new();
    let x = g.constant(t(&[1, 2, 3], &[5.0, 1.0, 9.0, 0.0, 0.0, 0.0])).unwrap();
    let mask = t(&[2, 3], &[ninf, 0.0, ninf, 0.0, ninf, ninf]);
    let y = g.softmax_masked(x, Some(&mask)).unwrap();
    assert_eq!(g.value(y).data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);

    let dead = t(&[2, 3], &[ninf, ninf, ninf, 0.0, 0.0, 0.0]);
    assert!(matches!(g.softmax_masked(x, Some(&dead)), Err(crate::LfError::Invalid(_))));
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(vals in prop::collection::vec(-30.0f64..30.0, 24), keep in prop::collection::vec(any::<bool>(), 24)) {
        let mask = Tensor::from_fn(&[4, 6], |i| if keep[i] || i % 6 == i / 6 { 0.0 } else { f64::NEG_INFINITY });
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 4, 6], &vals)).unwrap();
        let y = g.softmax_masked(x, Some(&mask)).unwrap();
        for row in g.value(y).data().chunks(6) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn layer_norm_standardises_rows() {
    let xv = Tensor::from_fn(&[4, 16], |i| 20.0 * ((i * 7919 % 97) as f64 / 97.0 - 0.3));
    for eps in [0.0, 1e-5] {
        let mut g = Graph::<f64>::new();
        let x = g.constant(xv.clone()).unwrap();
        let one = g.constant(Tensor::full(&[16], 1.0)).unwrap();
        let zero = g.constant(Tensor::zeros(&[16])).unwrap();
        let y = g.layer_norm(x, one, zero, eps).unwrap();
        for row in g.value(y).data().chunks(16) {
            let m = row.iter().sum::<f64>() / 16.0;
            let v = row.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 16.0;
            assert!(m.abs() < 1e-12, "mean {m}");
            // raw rows have variance ≈ 33, so the eps shift stays below 1e-6
            assert!((v - 1.0).abs() < 1e-6, "var {v}");
        }
    }
}

#[test]
fn linear_sum_gradient_is_exact() {
    let xv = t(&[2, 3], &[1.0, 2.0, -3.0, 0.5, 4.0, 1.5]);
    let mut store = ParamStore::new();
    let wid = store.add("w", Tensor::from_fn(&[3, 2], |i| i as f64)).unwrap();
    let mut g = Graph::new();
    let x = g.constant(xv.clone()).unwrap();
    let w = g.param(&store, wid).unwrap();
    let y = g.linear(x, w, None).unwrap();
    let l = g.sum(y).unwrap();
    let grads = g.backward(l).unwrap();
    let gw = g.param_grads(&grads, &store)[0].clone().unwrap();
    // d/dW_io Σ_m Σ_o x_mi W_io = Σ_m x_mi
    assert_eq!(gw, vec![1.5, 1.5, 6.0, 6.0, -1.5, -1.5]);
}

#[test]
fn backward_needs_scalar() {
    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::zeros(&[2])).unwrap();
    assert!(g.backward(x).is_err());
}

#[test]
fn permute_gradient_is_inverse_permutation() {
    let shape = [2, 3, 4, 5];
    let perm = [3, 1, 0, 2];
    let w = Tensor::from_fn(&[5, 3, 2, 4], |i| (i as f64 * 1.618).sin());
    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::zeros(&shape)).unwrap();
    let p = g.permute(x, &perm).unwrap();
    let l = g.weighted_sum(p, w.clone()).unwrap();
    let grads = g.backward(l).unwrap();
    let want = crate::layout::permute_copy(w.data(), w.shape(), &crate::layout::inverse_perm(&perm));
    assert_eq!(grads.get(x).unwrap(), want.as_slice());
}

#[test]
fn non_finite_results_are_rejected() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::full(&[2], 1e300)).unwrap();
    assert!(matches!(g.scale(x, 1e10), Err(crate::LfError::NonFinite("scale"))));
    assert!(g.constant(Tensor::full(&[1], f64::NAN)).is_err());
}

#[test]
fn adam_first_step_matches_hand_computation() {
    let mut store = ParamStore::<f64>::new();
    store.add("p", Tensor::scalar(0.0)).unwrap();
    let cfg = AdamConfig::default();
    assert_eq!((cfg.beta1, cfg.beta2), (0.9, 0.999));
    let mut st = AdamState::new(&store, cfg);
    st.step(&mut store, &[Some(vec![1.0])]).unwrap();
    // m = 0.1, v = 0.001; bias correction gives m̂ = 1, v̂ = 1
    let want = -2e-4 * 1.0 / (1.0 + 1e-8);
    assert!((store.get(store.find("p").unwrap()).data()[0] - want).abs() < 1e-18);
}

#[test]
fn adam_is_deterministic() {
    let mut a = ParamStore::<f32>::new();
    a.add("w", Tensor::from_fn(&[7], |i| i as f32 * 0.1)).unwrap();
    let mut b = a.clone();
    let mut sa = AdamState::new(&a, AdamConfig { lr: 1e-2, ..Default::default() });
    let mut sb = sa.clone();
    for k in 0..10 {
        let grad: Vec<f32> = (0..7).map(|i| ((i + k) as f32).cos()).collect();
        sa.step(&mut a, &[Some(grad.clone())]).unwrap();
        sb.step(&mut b, &[Some(grad)]).unwrap();
    }
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let mut store = ParamStore::<f32>::new();
    store.add("a.w", Tensor::from_fn(&[2, 3], |i| i as f32 - 2.5)).unwrap();
    store.add("b", Tensor::scalar(0.25)).unwrap();
    let cfg = serde_json::json!({"channels": 8});
    let bytes = encode_checkpoint(&store, &cfg);
    assert_eq!(&bytes[..4], b"LFCK");
    let p = std::path::Path::new("mem");
    let (back, c) = decode_checkpoint::<f32>(&bytes, p).unwrap();
    assert_eq!(back, store);
    assert_eq!(c, cfg);
    let (wide, _) = decode_checkpoint::<f64>(&bytes, p).unwrap();
    assert_eq!(wide, store.cast::<f64>());
    assert!(decode_checkpoint::<f32>(&bytes[..bytes.len() - 1], p).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_checkpoint::<f32>(&bad, p), Err(crate::LfError::Format { .. })));
}
