use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{kaiming_uniform, Conv2dSpec, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::error::Result;

/// Negative slope of every leaky ReLU in the networks.
pub const LRELU_SLOPE: f64 = 0.1;

/// Parameters bound into a graph, indexed by [`ParamId::index`].
pub type Bound = [Var];

/// Registers named parameters with deterministic initial values.
pub struct Init<'a, T> {
    pub store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Real> Init<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, seed: u64) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Kaiming-uniform (or zero) kernel `[co, ci, kh, kw]` and zero bias.
    pub fn conv(
        &mut self,
        name: &str,
        [co, ci, kh, kw]: [usize; 4],
        spec: Conv2dSpec,
        zero: bool,
    ) -> Result<ConvParams> {
        let shape = [co, ci, kh, kw];
        let w = if zero {
            Tensor::zeros(&shape)
        } else {
            kaiming_uniform(&shape, ci * kh * kw, &mut self.rng)
        };
        Ok(ConvParams {
            w: self.store.add(format!("{name}.w"), w)?,
            b: self.store.add(format!("{name}.b"), Tensor::zeros(&[co]))?,
            spec,
        })
    }

    /// Kaiming-uniform (or zero) `[rows, cols]` matrix for `x · W`.
    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize, zero: bool) -> Result<ParamId> {
        let w = if zero {
            Tensor::zeros(&[rows, cols])
        } else {
            kaiming_uniform(&[rows, cols], rows, &mut self.rng)
        };
        self.store.add(name, w)
    }

    pub fn filled(&mut self, name: &str, len: usize, v: f64) -> Result<ParamId> {
        self.store.add(name, Tensor::full(&[len], T::of(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvParams {
    pub w: ParamId,
    pub b: ParamId,
    pub spec: Conv2dSpec,
}

impl ConvParams {
    pub fn apply<T: Real>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        g.conv2d(x, p[self.w.index()], Some(p[self.b.index()]), self.spec)
    }
}

/// Inverse of the permutation `perm`.
pub(crate) fn inv(perm: &[usize]) -> Vec<usize> {
    crate::layout::inverse_perm(perm)
}

/// Applies `f` to every view of a `[B, C, U, V, Y, X]` feature tensor as a
/// `[B·U·V, C, Y, X]` batch and restores the layout.
pub(crate) fn per_view<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    f: impl FnOnce(&mut Graph<T>, Var) -> Result<Var>,
) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let (b, c, u, v, y, w) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let t = g.permute(x, &[0, 2, 3, 1, 4, 5])?;
    let t = g.reshape(t, &[b * u * v, c, y, w])?;
    let t = f(g, t)?;
    let o = g.shape(t).to_vec();
    let t = g.reshape(t, &[b, u, v, o[1], o[2], o[3]])?;
    g.permute(t, &[0, 3, 1, 2, 4, 5])
}

/// 1×1 convolution of a `[B, C, U, V, Y, X]` tensor; channel mixing needs no
/// rearrangement, only a flat view.
pub(crate) fn pointwise<T: Real>(g: &mut Graph<T>, p: &Bound, x: Var, conv: &ConvParams) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let t = g.reshape(x, &[s[0], s[1], s[2] * s[3], s[4] * s[5]])?;
    let t = conv.apply(g, p, t)?;
    let co = g.shape(t)[1];
    g.reshape(t, &[s[0], co, s[2], s[3], s[4], s[5]])
}
