use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::suite::{c42_gradcheck, mhxa_gradcheck, network_gradcheck, randomize};
use super::*;
use crate::autodiff::{Conv2dSpec, GradCheckConfig, Graph, ParamStore, Tensor};
use crate::lightfield::{rot90_lf, LfDims, LightField4D, SubspaceId};

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn bind(g: &mut Graph<f64>, store: &ParamStore<f64>) -> Vec<crate::autodiff::Var> {
    store.ids().map(|id| g.param(store, id).unwrap()).collect()
}

// ---- X-mask ------------------------------------------------------------

#[test]
fn unbounded_mask_is_all_zero() {
    let m = build_xmask::<f64>(4, 7, f64::INFINITY).unwrap();
    assert!(m.data().iter().all(|&v| v == 0.0));
}

#[test]
fn three_by_three_mask_matches_enumeration() {
    // rows: query (a, p) = index 3a + p; 1 = admitted
    #[rustfmt::skip]
    let want = [
        1, 0, 0,  1, 1, 0,  1, 1, 1,
        0, 1, 0,  1, 1, 1,  1, 1, 1,
        0, 0, 1,  0, 1, 1,  1, 1, 1,
        1, 1, 0,  1, 0, 0,  1, 1, 0,
        1, 1, 1,  0, 1, 0,  1, 1, 1,
        0, 1, 1,  0, 0, 1,  0, 1, 1,
        1, 1, 1,  1, 1, 0,  1, 0, 0,
        1, 1, 1,  1, 1, 1,  0, 1, 0,
        1, 1, 1,  0, 1, 1,  0, 0, 1,
    ];
    let m = build_xmask::<f64>(3, 3, 1.0).unwrap();
    let got: Vec<i32> = m.data().iter().map(|&v| (v == 0.0) as i32).collect();
    assert_eq!(got, want);
    assert!(m.data().iter().all(|&v| v == 0.0 || v == f64::NEG_INFINITY));
}

#[test]
fn admitted_count_matches_double_loop() {
    let (s, l, d) = (5usize, 32usize, 2.0);
    let mut count = 0;
    for aq in 0..s {
        for pq in 0..l {
            for ak in 0..s {
                for pk in 0..l {
                    let (da, dp) = (ak.abs_diff(aq), pk.abs_diff(pq));
                    let ok = if da == 0 { dp == 0 } else { dp as f64 <= d * da as f64 };
                    count += ok as usize;
                }
            }
        }
    }
    assert_eq!(admitted_count(&build_xmask::<f64>(s, l, d).unwrap()), count);
}

#[test]
fn mask_rejects_bad_arguments() {
    assert!(build_xmask::<f64>(0, 3, 1.0).is_err());
    assert!(build_xmask::<f64>(3, 3, 0.0).is_err());
    assert!(build_xmask::<f64>(3, 3, f64::NAN).is_err());
}

proptest! {
    #[test]
    fn mask_is_symmetric_with_open_diagonal(s in 1usize..6, l in 1usize..12, d in 0.1f64..20.0) {
        let m = build_xmask::<f64>(s, l, d).unwrap();
        let n = s * l;
        for q in 0..n {
            prop_assert_eq!(m.data()[q * n + q], 0.0);
            for k in 0..n {
                prop_assert_eq!(m.data()[q * n + k], m.data()[k * n + q]);
            }
        }
    }

    #[test]
    fn admitted_sets_grow_with_d_max(s in 1usize..6, l in 1usize..12, d1 in 0.1f64..10.0, extra in 0.0f64..10.0) {
        let a = build_xmask::<f64>(s, l, d1).unwrap();
        let b = build_xmask::<f64>(s, l, d1 + extra).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!(!(x.is_finite() && !y.is_finite()));
        }
    }
}

// ---- attention -----------------------------------------------------------

/// Loop-level evaluation of the attention block.
fn mhxa_oracle(t: &Tensor<f64>, mask: &Tensor<f64>, store: &ParamStore<f64>, p: &MhxaParams, heads: usize) -> Vec<f64> {
    let (b, n, c) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let dh = c / heads;
    let get = |id: crate::autodiff::ParamId| store.get(id).data().to_vec();
    let (gamma, beta) = (get(p.ln_gamma), get(p.ln_beta));
    let (wq, wk, wv, wo) = (get(p.wq), get(p.wk), get(p.wv), get(p.wo));
    let matvec = |x: &[f64], w: &[f64]| -> Vec<f64> {
        (0..c).map(|o| (0..c).map(|i| x[i] * w[i * c + o]).sum()).collect()
    };
    let mut out = t.data().to_vec();
    for bi in 0..b {
        let tok = |i: usize| &t.data()[(bi * n + i) * c..(bi * n + i + 1) * c];
        let ln: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let x = tok(i);
                let m = x.iter().sum::<f64>() / c as f64;
                let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / c as f64;
                (0..c).map(|j| (x[j] - m) / (v + 1e-5).sqrt() * gamma[j] + beta[j]).collect()
            })
            .collect();
        let q: Vec<_> = ln.iter().map(|x| matvec(x, &wq)).collect();
        let k: Vec<_> = ln.iter().map(|x| matvec(x, &wk)).collect();
        let v: Vec<_> = (0..n).map(|i| matvec(tok(i), &wv)).collect();
        for i in 0..n {
            let mut cat = vec![0.0; c];
            for h in 0..heads {
                let r = h * dh..(h + 1) * dh;
                let logits: Vec<f64> = (0..n)
                    .map(|j| {
                        let dot: f64 = r.clone().map(|e| q[i][e] * k[j][e]).sum();
                        dot / (dh as f64).sqrt() + mask.data()[i * n + j]
                    })
                    .collect();
                let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let ex: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
                let z: f64 = ex.iter().sum();
                for e in r.clone() {
                    cat[e] = (0..n).map(|j| ex[j] / z * v[j][e]).sum();
                }
            }
            let proj = matvec(&cat, &wo);
            for j in 0..c {
                out[(bi * n + i) * c + j] += proj[j];
            }
        }
    }
    out
}

fn attention_setup(c: usize, seed: u64) -> (ParamStore<f64>, MhxaParams) {
    let mut store = ParamStore::new();
    let p = MhxaParams::init(&mut Init::new(&mut store, seed), "a", c, false).unwrap();
    randomize(&mut store, 0.7, &mut ChaCha8Rng::seed_from_u64(seed + 100));
    (store, p)
}

#[test]
fn attention_matches_loop_oracle_and_unbounded_mask_is_unmasked() {
    let (s, l, c, heads) = (3, 4, 8, 2);
    let (store, p) = attention_setup(c, 3);
    let t = rand_tensor(&[2, s * l, c], 4);
    for d in [1.0, 2.0, f64::INFINITY] {
        let mask = build_xmask::<f64>(s, l, d).unwrap();
        let mut g = Graph::new();
        let bound = bind(&mut g, &store);
        let x = g.constant(t.clone()).unwrap();
        let y = mhxa(&mut g, &bound, x, Some(&mask), &p, heads).unwrap();
        let want = mhxa_oracle(&t, &mask, &store, &p, heads);
        for (a, b) in g.value(y).data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "d_max {d}: {a} vs {b}");
        }
        if d.is_infinite() {
            let y0 = mhxa(&mut g, &bound, x, None, &p, heads).unwrap();
            for (a, b) in g.value(y).data().iter().zip(g.value(y0).data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn self_only_mask_reduces_to_value_projection() {
    let (n, c) = (6, 4);
    let (store, p) = attention_setup(c, 9);
    let t = rand_tensor(&[1, n, c], 10);
    let mask = Tensor::from_fn(&[n, n], |i| if i / n == i % n { 0.0 } else { f64::NEG_INFINITY });
    let mut g = Graph::new();
    let bound = bind(&mut g, &store);
    let x = g.constant(t.clone()).unwrap();
    let y = mhxa(&mut g, &bound, x, Some(&mask), &p, 2).unwrap();
    // one-hot attention: out = T + (T W_v) W_O
    let wv = g.linear(x, bound[p.wv.index()], None).unwrap();
    let o = g.linear(wv, bound[p.wo.index()], None).unwrap();
    let want = g.add(o, x).unwrap();
    for (a, b) in g.value(y).data().iter().zip(g.value(want).data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_gradients_pass_check() {
    let cfg = GradCheckConfig::default();
    for seed in 0..2 {
        let r = mhxa_gradcheck(2, 3, 4, 8, 2, 1.0, seed, &cfg).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}

#[test]
fn epixformer_preserves_shape_and_starts_as_identity() {
    let mut store = ParamStore::<f32>::new();
    let p = EpixParams::init(&mut Init::new(&mut store, 1), "e", 64, true).unwrap();
    let mut g = Graph::new();
    let bound: Vec<_> = store.ids().map(|id| g.param(&store, id).unwrap()).collect();
    let xv = rand_tensor(&[1, 64, 5, 5, 32, 32], 2).cast::<f32>();
    let x = g.constant(xv.clone()).unwrap();
    let y = epixformer(&mut g, &bound, x, &p, 4, 2.0).unwrap();
    assert_eq!(g.value(y), &xv);
}

fn rot90_features(t: &Tensor<f64>) -> Tensor<f64> {
    let s = t.shape();
    let rotated: Vec<LightField4D> = t.to_lfs().unwrap().iter().map(|lf| rot90_lf(lf).unwrap()).collect();
    let out = Tensor::stack_lfs(&rotated).unwrap();
    assert_eq!(out.shape()[..4], s[..4]);
    out
}

/// Rotating the light field swaps the roles of the two EPI subspaces: the
/// horizontal pass on the rotated input equals the rotated vertical pass,
/// and the two-pass block commutes with rotation once its pass order is
/// swapped.
#[test]
fn rotation_exchanges_epi_passes() {
    let (store, p) = attention_setup(8, 21);
    let f = rand_tensor(&[1, 8, 3, 3, 5, 4], 22);
    let fr = rot90_features(&f);
    let run = |input: &Tensor<f64>, passes: &[EpiPass]| {
        let mut g = Graph::new();
        let bound = bind(&mut g, &store);
        let mut x = g.constant(input.clone()).unwrap();
        for &ps in passes {
            x = epi_pass(&mut g, &bound, x, ps, &p, 2, 1.0).unwrap();
        }
        g.value(x).clone()
    };
    let close = |a: &Tensor<f64>, b: &Tensor<f64>| {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    };
    close(&run(&fr, &[EpiPass::Ux]), &rot90_features(&run(&f, &[EpiPass::Vy])));
    close(&run(&fr, &[EpiPass::Vy]), &rot90_features(&run(&f, &[EpiPass::Ux])));
    close(
        &run(&fr, &[EpiPass::Ux, EpiPass::Vy]),
        &rot90_features(&run(&f, &[EpiPass::Vy, EpiPass::Ux])),
    );
}

// ---- subspace block -------------------------------------------------------

#[test]
fn sai_branch_with_centre_tap_is_identity() {
    let c = 3;
    let mut store = ParamStore::<f64>::new();
    let conv = Init::new(&mut store, 0)
        .conv("sai", [c, c, 3, 3], Conv2dSpec::padded(1, 1), true)
        .unwrap();
    for o in 0..c {
        store.get_mut(conv.w).data_mut()[((o * c + o) * 3 + 1) * 3 + 1] = 1.0;
    }
    let xv = rand_tensor(&[2, c, 3, 3, 6, 5], 1);
    let mut g = Graph::new();
    let bound = bind(&mut g, &store);
    let x = g.constant(xv.clone()).unwrap();
    let y = branch_forward(&mut g, &bound, x, SubspaceId::Sai, &conv).unwrap();
    assert_eq!(g.value(y), &xv);
}

#[test]
fn macpi_branch_at_one_angle_is_pointwise() {
    let (c, h, w) = (4, 5, 6);
    let mut store = ParamStore::<f64>::new();
    let ([kh, kw], spec, e) = branch_kernel(SubspaceId::MacPi, 1);
    assert_eq!((kh, kw, e), (1, 1, 1));
    let conv = Init::new(&mut store, 3).conv("m", [c, c, 1, 1], spec, false).unwrap();
    let xv = rand_tensor(&[1, c, 1, 1, h, w], 2);
    let mut g = Graph::new();
    let bound = bind(&mut g, &store);
    let x = g.constant(xv.clone()).unwrap();
    let y = branch_forward(&mut g, &bound, x, SubspaceId::MacPi, &conv).unwrap();
    let wt = store.get(conv.w).data();
    for o in 0..c {
        for pix in 0..h * w {
            let want: f64 = (0..c).map(|i| wt[o * c + i] * xv.data()[i * h * w + pix]).sum();
            assert!((g.value(y).data()[o * h * w + pix] - want).abs() < 1e-14);
        }
    }
}

/// Direct evaluation of one EPI-UX branch output sample.
#[test]
fn epi_branch_matches_direct_sum() {
    let (c, a, h, w) = (2, 3, 4, 5);
    let mut store = ParamStore::<f64>::new();
    let ([kh, kw], spec, e) = branch_kernel(SubspaceId::EpiUx, a);
    let conv = Init::new(&mut store, 5).conv("e", [c * e, c, kh, kw], spec, false).unwrap();
    randomize(&mut store, 1.0, &mut ChaCha8Rng::seed_from_u64(6));
    let xv = rand_tensor(&[1, c, a, a, h, w], 7);
    let mut g = Graph::new();
    let bound = bind(&mut g, &store);
    let x = g.constant(xv.clone()).unwrap();
    let y = branch_forward(&mut g, &bound, x, SubspaceId::EpiUx, &conv).unwrap();
    let (wt, bs) = (store.get(conv.w).data(), store.get(conv.b).data());
    let xi = |ch: usize, u: usize, v: usize, yy: usize, xx: usize| xv.data()[(((ch * a + u) * a + v) * h + yy) * w + xx];
    for co in 0..c {
        for du in 0..a {
            for v in 0..a {
                for yy in 0..h {
                    for xx in 0..w {
                        let oc = co * a + du;
                        let mut want = bs[oc];
                        for ci in 0..c {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let sx = xx as isize + j as isize - (kw / 2) as isize;
                                    if sx >= 0 && (sx as usize) < w {
                                        want += wt[((oc * c + ci) * kh + i) * kw + j] * xi(ci, i, v, yy, sx as usize);
                                    }
                                }
                            }
                        }
                        let got = g.value(y).data()[(((co * a + du) * a + v) * h + yy) * w + xx];
                        assert!((got - want).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn branch_and_block_shapes_at_full_width() {
    let (c, a) = (64, 5);
    let mut store = ParamStore::<f32>::new();
    let params = C42Params::init(&mut Init::new(&mut store, 0), "b", c, a, true, true).unwrap();
    let xv = rand_tensor(&[1, c, a, a, 32, 32], 1).cast::<f32>();
    let mut g = Graph::new();
    let bound: Vec<_> = store.ids().map(|id| g.param(&store, id).unwrap()).collect();
    let x = g.constant(xv.clone()).unwrap();
    let vsi = params.branches.iter().find(|b| b.id == SubspaceId::VsiVx).unwrap();
    let y = branch_forward(&mut g, &bound, x, SubspaceId::VsiVx, &vsi.conv).unwrap();
    assert_eq!(g.shape(y), xv.shape());
    // zero-initialised tail: the block is its residual
    let z = c42_block(&mut g, &bound, x, &params).unwrap();
    assert_eq!(g.value(z), &xv);
}

#[test]
fn block_gradients_pass_check() {
    let r = c42_gradcheck(8, 2, 6, 0, &GradCheckConfig::default()).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn even_angular_kernels_stay_centred() {
    assert_eq!(branch_kernel(SubspaceId::EpiVy, 2).0, [2, 3]);
    assert_eq!(branch_kernel(SubspaceId::VsiUy, 5).0, [5, 5]);
    assert_eq!(branch_ids(false).len(), 4);
}

// ---- heads and networks -----------------------------------------------------

#[test]
fn pixel_shuffle_places_channels() {
    let r = 2;
    let xv = Tensor::from_fn(&[1, 8, 2, 3], |i| i as f64);
    let mut g = Graph::new();
    let x = g.constant(xv.clone()).unwrap();
    let y = pixel_shuffle(&mut g, x, r).unwrap();
    assert_eq!(g.shape(y), [1, 2, 4, 6]);
    for c in 0..2 {
        for i in 0..r {
            for j in 0..r {
                for h in 0..2 {
                    for w in 0..3 {
                        let src = xv.data()[((c * 4 + i * r + j) * 2 + h) * 3 + w];
                        assert_eq!(g.value(y).data()[(c * 4 + h * r + i) * 6 + w * r + j], src);
                    }
                }
            }
        }
    }
}

fn toy_ssr(c: usize, skip: bool) -> NetworkConfig {
    NetworkConfig {
        bicubic_skip: skip,
        ..NetworkConfig::ssr(2, 5).toy(c, 1, 1)
    }
}

#[test]
fn ssr_network_shapes_and_zero_head_gives_skip() {
    let mut net = Network::<f32>::new(toy_ssr(16, true), 1).unwrap();
    let lf = LightField4D::from_fn(LfDims { c: 1, u: 5, v: 5, y: 16, x: 16 }, |_, u, v, y, x| {
        ((u * 3 + v * 5 + y * 7 + x * 11) % 13) as f64 / 12.0
    })
    .unwrap();
    let out = net.predict(std::slice::from_ref(&lf)).unwrap();
    assert_eq!(out[0].dims(), LfDims { c: 1, u: 5, v: 5, y: 32, x: 32 });
    let head = net.params().find("head.w").unwrap();
    net.params_mut().get_mut(head).data_mut().fill(0.0);
    let out = net.predict(std::slice::from_ref(&lf)).unwrap();
    let skip = crate::pipeline::resize_lf(&lf, 2.0).unwrap();
    for (a, b) in out[0].data().iter().zip(skip.data()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn full_scale_ssr_head_output() {
    let mut store = ParamStore::<f32>::new();
    let conv = Init::new(&mut store, 0).conv("h", [4, 64, 3, 3], Conv2dSpec::padded(1, 1), false).unwrap();
    let mut g = Graph::new();
    let bound: Vec<_> = store.ids().map(|id| g.param(&store, id).unwrap()).collect();
    let x = g.constant(Tensor::zeros(&[1, 64, 5, 5, 32, 32])).unwrap();
    let y = ssr_head(&mut g, &bound, x, &conv, 2, None).unwrap();
    assert_eq!(g.shape(y), [1, 1, 5, 5, 64, 64]);
}

#[test]
fn asr_network_and_head_shapes() {
    let cfg = NetworkConfig::asr(true).toy(8, 1, 1);
    let net = Network::<f32>::new(cfg, 2).unwrap();
    let lf = LightField4D::from_fn(LfDims { c: 1, u: 2, v: 2, y: 32, x: 32 }, |_, u, v, y, x| {
        ((u + 2 * v + y * x) % 9) as f64 / 8.0
    })
    .unwrap();
    let out = net.predict(&[lf]).unwrap();
    assert_eq!(out[0].dims(), LfDims { c: 1, u: 7, v: 7, y: 32, x: 32 });
    assert_eq!(out[0].data().len(), 7 * 7 * 32 * 32);
}

#[test]
fn asr_head_identity_passes_angles_through() {
    let (a, h, w) = (3, 4, 5);
    let mut store = ParamStore::<f64>::new();
    let conv = Init::new(&mut store, 0).conv("h", [a * a, a * a, 1, 1], Conv2dSpec::default(), true).unwrap();
    for k in 0..a * a {
        store.get_mut(conv.w).data_mut()[k * a * a + k] = 1.0;
    }
    let xv = rand_tensor(&[2, 1, a, a, h, w], 3);
    let mut g = Graph::new();
    let bound = bind(&mut g, &store);
    let x = g.constant(xv.clone()).unwrap();
    let y = asr_head(&mut g, &bound, x, &conv, a).unwrap();
    assert_eq!(g.value(y), &xv);
}

#[test]
fn asr_copy_inputs_restores_corner_views() {
    let cfg = NetworkConfig {
        copy_inputs: true,
        ..NetworkConfig::asr(false).toy(4, 1, 0)
    };
    let net = Network::<f64>::new(cfg, 0).unwrap();
    let lf = LightField4D::from_fn(LfDims { c: 1, u: 2, v: 2, y: 6, x: 6 }, |_, u, v, y, x| {
        (u * 2 + v) as f64 * 0.1 + (y * x) as f64 * 0.01
    })
    .unwrap();
    let out = net.predict(std::slice::from_ref(&lf)).unwrap().remove(0);
    for (k, (u, v)) in net.input_positions().into_iter().enumerate() {
        assert_eq!(out.view(0, u, v), lf.view(0, k / 2, k % 2));
    }
}

#[test]
fn fresh_trunk_is_identity() {
    let net = Network::<f64>::new(NetworkConfig::ssr(2, 3).toy(8, 2, 2), 4).unwrap();
    let mut g = Graph::new();
    let bound = net.bind(&mut g).unwrap();
    let fv = rand_tensor(&[1, 8, 3, 3, 6, 6], 5);
    let f = g.constant(fv.clone()).unwrap();
    let y = net.trunk(&mut g, &bound, f).unwrap();
    assert_eq!(g.value(y), &fv);
}

#[test]
fn full_configuration_instantiates() {
    let net = Network::<f32>::new(NetworkConfig::ssr(4, 5), 0).unwrap();
    assert_eq!(net.config().channels, 64);
    assert_eq!((net.config().n_c42, net.config().n_epix), (6, 6));
    assert!(net.params().num_values() > 1_000_000);
    Network::<f32>::new(NetworkConfig::asr(false), 0).unwrap();
}

#[test]
fn config_validation() {
    assert!(NetworkConfig { scale: 3, ..NetworkConfig::ssr(2, 5) }.validate().is_err());
    assert!(NetworkConfig { heads: 3, ..NetworkConfig::ssr(2, 5) }.validate().is_err());
    assert!(NetworkConfig { a_out: 6, ..NetworkConfig::asr(true) }.validate().is_err());
    let cfg: NetworkConfig = serde_json::from_str(r#"{"task": "asr", "channels": 8, "heads": 2}"#).unwrap();
    assert_eq!(cfg.task, Task::Asr);
    assert!(serde_json::from_str::<NetworkConfig>(r#"{"chanels": 8}"#).is_err());
}

#[test]
fn toy_network_gradients_pass_check() {
    let cfg = NetworkConfig::ssr(2, 2).toy(8, 1, 1);
    let gc = GradCheckConfig {
        max_entries: Some(12),
        ..Default::default()
    };
    let r = network_gradcheck(&cfg, 6, 0, &gc).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn checkpoint_rebuilds_network() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.lfck");
    let net = Network::<f32>::new(NetworkConfig::asr(true).toy(4, 1, 1), 9).unwrap();
    net.save(&path).unwrap();
    let back = Network::<f32>::load(&path).unwrap();
    assert_eq!(back, net);
}
