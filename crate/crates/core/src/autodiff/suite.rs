//! Randomised gradient-check cases covering every differentiable operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{check_gradients, Conv2dSpec, GradCheckConfig, GradCheckReport, Graph, Tensor, Var};

type Objective = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + Sync>;

/// One operator under test: named inputs and a scalar objective.
pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<(String, Tensor<f64>)>,
    pub objective: Objective,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Values at least `gap` away from zero, for ops with a kink there.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(gap..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn named(pairs: Vec<(&str, Tensor<f64>)>) -> Vec<(String, Tensor<f64>)> {
    pairs.into_iter().map(|(n, t)| (n.to_string(), t)).collect()
}

/// Wraps `body` so its tensor output is reduced with fixed random weights.
fn case(
    name: &'static str,
    rng: &mut ChaCha8Rng,
    inputs: Vec<(&str, Tensor<f64>)>,
    out_shape: &[usize],
    body: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + Sync + 'static,
) -> OpCase {
    let w = uniform(rng, out_shape);
    OpCase {
        name,
        inputs: named(inputs),
        objective: Box::new(move |g, v| {
            let out = body(g, v)?;
            g.weighted_sum(out, w.clone())
        }),
    }
}

/// All operator cases for one seed.
pub fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut r;
    let mut cases = Vec::new();
    let s = [2, 3, 4];
    let (a, b) = (uniform(rng, &s), uniform(rng, &s));
    cases.push(case("add", rng, vec![("a", a), ("b", b)], &s, |g, v| g.add(v[0], v[1])));
    let (a, b) = (uniform(rng, &s), uniform(rng, &s));
    cases.push(case("mul", rng, vec![("a", a), ("b", b)], &s, |g, v| g.mul(v[0], v[1])));
    let a = uniform(rng, &s);
    cases.push(case("scale", rng, vec![("a", a)], &s, |g, v| g.scale(v[0], -1.7)));
    let a = away_from_zero(rng, &s, 1e-3);
    cases.push(case("leaky_relu", rng, vec![("a", a)], &s, |g, v| g.leaky_relu(v[0], 0.1)));

    let x = uniform(rng, &[2, 3, 5, 5]);
    let w = uniform(rng, &[4, 3, 3, 3]);
    let bias = uniform(rng, &[4]);
    cases.push(case(
        "conv2d",
        rng,
        vec![("x", x), ("w", w), ("b", bias)],
        &[2, 4, 5, 5],
        |g, v| g.conv2d(v[0], v[1], Some(v[2]), Conv2dSpec::padded(1, 1)),
    ));
    let x = uniform(rng, &[2, 2, 7, 6]);
    let w = uniform(rng, &[3, 2, 3, 2]);
    let spec = Conv2dSpec {
        stride: [2, 1],
        padding: [1, 2],
        dilation: [1, 2],
    };
    cases.push(case(
        "conv2d_strided_dilated",
        rng,
        vec![("x", x), ("w", w)],
        &[2, 3, 4, 8],
        move |g, v| g.conv2d(v[0], v[1], None, spec),
    ));

    let x = uniform(rng, &[2, 3, 5]);
    let w = uniform(rng, &[5, 4]);
    let bias = uniform(rng, &[4]);
    cases.push(case(
        "linear",
        rng,
        vec![("x", x), ("w", w), ("b", bias)],
        &[2, 3, 4],
        |g, v| g.linear(v[0], v[1], Some(v[2])),
    ));
    let (a, b) = (uniform(rng, &[3, 2, 4]), uniform(rng, &[3, 4, 5]));
    cases.push(case("batch_matmul", rng, vec![("a", a), ("b", b)], &[3, 2, 5], |g, v| {
        g.batch_matmul(v[0], v[1], false)
    }));
    let (a, b) = (uniform(rng, &[3, 2, 4]), uniform(rng, &[3, 5, 4]));
    cases.push(case("batch_matmul_t", rng, vec![("a", a), ("b", b)], &[3, 2, 5], |g, v| {
        g.batch_matmul(v[0], v[1], true)
    }));

    let x = uniform(rng, &[3, 4, 8]);
    let gamma = uniform(rng, &[8]);
    let beta = uniform(rng, &[8]);
    cases.push(case(
        "layer_norm",
        rng,
        vec![("x", x), ("gamma", gamma), ("beta", beta)],
        &[3, 4, 8],
        |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5),
    ));

    let x = uniform(rng, &[2, 5, 5]).map_values(|v| 2.0 * v);
    let mask = Tensor::from_fn(&[5, 5], |i| {
        let (q, k) = (i / 5, i % 5);
        if q == k || (q + k) % 3 == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    });
    cases.push(case("softmax_masked", rng, vec![("x", x)], &[2, 5, 5], move |g, v| {
        g.softmax_masked(v[0], Some(&mask))
    }));

    let x = uniform(rng, &[2, 3, 4, 5]);
    cases.push(case("permute", rng, vec![("x", x)], &[4, 2, 5, 3], |g, v| {
        g.permute(v[0], &[2, 0, 3, 1])
    }));
    let x = uniform(rng, &[2, 3, 4]);
    cases.push(case("reshape", rng, vec![("x", x)], &[6, 4], |g, v| g.reshape(v[0], &[6, 4])));
    let (a, b) = (uniform(rng, &[2, 1, 3]), uniform(rng, &[2, 4, 3]));
    cases.push(case("concat", rng, vec![("a", a), ("b", b)], &[2, 5, 3], |g, v| {
        g.concat(&[v[0], v[1]], 1)
    }));

    let p = uniform(rng, &s);
    let gap = away_from_zero(rng, &s, 1e-3);
    let t = Tensor::from_fn(&s, |i| p.data()[i] + gap.data()[i]);
    cases.push(OpCase {
        name: "l1_loss",
        inputs: named(vec![("pred", p), ("target", t)]),
        objective: Box::new(|g, v| g.l1_loss(v[0], v[1])),
    });
    let x = uniform(rng, &s);
    cases.push(OpCase {
        name: "sum",
        inputs: named(vec![("x", x)]),
        objective: Box::new(|g, v| g.sum(v[0])),
    });
    cases
}

/// Runs [`op_cases`] for `seed`, returning one report per operator.
pub fn run_op_suite(seed: u64, cfg: &GradCheckConfig) -> Result<Vec<(&'static str, GradCheckReport)>> {
    op_cases(seed)
        .into_iter()
        .map(|c| Ok((c.name, check_gradients(&c.inputs, cfg, &c.objective)?)))
        .collect()
}
