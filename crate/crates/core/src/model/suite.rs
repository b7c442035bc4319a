//! Finite-difference checks of the network building blocks.
//!
//! Residual branches start at zero, which would hide most of the graph from
//! a gradient check, so every parameter is first replaced by random values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{check_gradients, GradCheckConfig, GradCheckReport, Graph, ParamStore, Tensor, Var};
use crate::error::Result;

use super::c42::{c42_block, C42Params};
use super::epix::{mhxa, MhxaParams};
use super::layers::Init;
use super::network::Network;
use super::xmask::build_xmask;
use super::NetworkConfig;

fn random(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Replaces every parameter by uniform noise of magnitude `scale`
/// (layer-norm gains are kept near one).
pub fn randomize(store: &mut ParamStore<f64>, scale: f64, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let gain = store.name(id).ends_with("gamma");
        for v in store.get_mut(id).data_mut() {
            let r = rng.gen_range(-scale..scale);
            *v = if gain { 1.0 + r } else { r };
        }
    }
}

fn inputs_of(store: &ParamStore<f64>) -> Vec<(String, Tensor<f64>)> {
    store.iter().map(|(_, n, t)| (n.to_string(), t.clone())).collect()
}

/// Checks one subspace block on random `[1, c, a, a, h, w]` features.
pub fn c42_gradcheck(c: usize, a: usize, hw: usize, seed: u64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let params = C42Params::init(&mut Init::new(&mut store, seed), "blk", c, a, true, false)?;
    randomize(&mut store, 0.5, &mut rng);
    let shape = [1, c, a, a, hw, hw];
    let w = random(&shape, -1.0, 1.0, &mut rng);
    let mut inputs = vec![("features".to_string(), random(&shape, -1.0, 1.0, &mut rng))];
    inputs.extend(inputs_of(&store));
    check_gradients(&inputs, cfg, |g: &mut Graph<f64>, v: &[Var]| {
        let y = c42_block(g, &v[1..], v[0], &params)?;
        g.weighted_sum(y, w.clone())
    })
}

/// Checks masked attention on `[b, s·l, c]` tokens with the X-mask for
/// `d_max`.
#[allow(clippy::too_many_arguments)]
pub fn mhxa_gradcheck(
    b: usize,
    s: usize,
    l: usize,
    c: usize,
    heads: usize,
    d_max: f64,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let params = MhxaParams::init(&mut Init::new(&mut store, seed), "att", c, false)?;
    randomize(&mut store, 0.8, &mut rng);
    let mask = build_xmask::<f64>(s, l, d_max)?;
    let shape = [b, s * l, c];
    let w = random(&shape, -1.0, 1.0, &mut rng);
    let mut inputs = vec![("tokens".to_string(), random(&shape, -1.0, 1.0, &mut rng))];
    inputs.extend(inputs_of(&store));
    check_gradients(&inputs, cfg, |g: &mut Graph<f64>, v: &[Var]| {
        let y = mhxa(g, &v[1..], v[0], Some(&mask), &params, heads)?;
        g.weighted_sum(y, w.clone())
    })
}

/// Checks a whole network (input, skip and every parameter) on a random
/// batch of one.
pub fn network_gradcheck(
    net_cfg: &NetworkConfig,
    spatial: usize,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::<f64>::new(net_cfg.clone(), seed)?;
    randomize(net.params_mut(), 0.3, &mut rng);
    let a = net_cfg.trunk_angular();
    let ci = net_cfg.image_channels;
    let x_shape = [1, ci, a, a, spatial, spatial];
    let s = net_cfg.output_scale();
    let ao = net_cfg.output_angular();
    let y_shape = [1, ci, ao, ao, spatial * s, spatial * s];
    let w = random(&y_shape, -1.0, 1.0, &mut rng);
    let mut inputs = vec![("input".to_string(), random(&x_shape, 0.0, 1.0, &mut rng))];
    let with_skip = net.uses_skip();
    if with_skip {
        inputs.push(("skip".to_string(), random(&y_shape, 0.0, 1.0, &mut rng)));
    }
    let first_param = inputs.len();
    inputs.extend(inputs_of(net.params()));
    check_gradients(&inputs, cfg, |g: &mut Graph<f64>, v: &[Var]| {
        let skip = with_skip.then(|| v[1]);
        let y = net.forward(g, &v[first_param..], v[0], skip)?;
        g.weighted_sum(y, w.clone())
    })
}
