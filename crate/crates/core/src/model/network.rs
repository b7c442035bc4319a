use std::path::Path;

use crate::autodiff::{load_checkpoint, save_checkpoint, Conv2dSpec, Graph, ParamStore, Real, Tensor, Var};
use crate::error::{LfError, Result};
use crate::lightfield::LightField4D;
use crate::pipeline::resize_lf;

use super::c42::{c42_block, C42Params};
use super::config::{NetworkConfig, Task};
use super::epix::{epixformer, EpixParams};
use super::heads::{asr_head, ssr_head};
use super::layers::{per_view, Bound, ConvParams, Init};

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    stem: ConvParams,
    blocks: Vec<C42Params>,
    epix: Vec<EpixParams>,
    head: ConvParams,
}

/// A spatial or angular super-resolution network with its parameters.
///
/// `forward` maps `[B, C_img, A, A, Y, X]` to
/// `[B, C_img, A', A', s·Y, s·X]` (`A' = A, s = scale` for SSR;
/// `A' = a_out, s = 1` for ASR): a per-view 3×3 conv, `n_c42` subspace
/// blocks, `n_epix` EPI transformers and the task head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    cfg: NetworkConfig,
    store: ParamStore<T>,
    layout: Layout,
}

impl<T: Real> Network<T> {
    pub fn new(cfg: NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut init = Init::new(&mut store, seed);
        let (c, ci, a) = (cfg.channels, cfg.image_channels, cfg.trunk_angular());
        let stem = init.conv("stem", [c, ci, 3, 3], Conv2dSpec::padded(1, 1), false)?;
        let blocks = (0..cfg.n_c42)
            .map(|i| C42Params::init(&mut init, &format!("c42.{i}"), c, a, cfg.use_vsi, true))
            .collect::<Result<Vec<_>>>()?;
        let epix = (0..cfg.n_epix)
            .map(|i| EpixParams::init(&mut init, &format!("epix.{i}"), c, true))
            .collect::<Result<Vec<_>>>()?;
        let head = match cfg.task {
            // with a bicubic skip a zero head starts the network at the
            // interpolation baseline
            Task::Ssr => init.conv(
                "head",
                [ci * cfg.scale * cfg.scale, c, 3, 3],
                Conv2dSpec::padded(1, 1),
                cfg.bicubic_skip,
            )?,
            Task::Asr => init.conv(
                "head",
                [ci * cfg.a_out * cfg.a_out, c * a * a, 1, 1],
                Conv2dSpec::default(),
                false,
            )?,
        };
        let layout = Layout {
            stem,
            blocks,
            epix,
            head,
        };
        Ok(Self { cfg, store, layout })
    }

    /// Rebuilds the architecture of `cfg` around existing parameters.
    pub fn with_params(cfg: NetworkConfig, params: &ParamStore<T>) -> Result<Self> {
        let mut net = Self::new(cfg, 0)?;
        net.store.load_from(params)?;
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            cfg: self.cfg.clone(),
            store: self.store.cast(),
            layout: self.layout.clone(),
        }
    }

    /// Adds every parameter to `g`; the result is indexed by parameter id.
    pub fn bind(&self, g: &mut Graph<T>) -> Result<Vec<Var>> {
        self.store.ids().map(|id| g.param(&self.store, id)).collect()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let a = self.cfg.trunk_angular();
        let ok = shape.len() == 6
            && shape[1] == self.cfg.image_channels
            && shape[2] == a
            && shape[3] == a;
        if !ok {
            return Err(LfError::shape(format!(
                "network expects [B, {}, {a}, {a}, Y, X] input, got {shape:?}",
                self.cfg.image_channels
            )));
        }
        Ok(())
    }

    /// Stem conv only.
    pub fn stem(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        self.check_input(g.shape(x))?;
        per_view(g, x, |g, t| self.layout.stem.apply(g, p, t))
    }

    /// Subspace blocks followed by the EPI transformers.
    pub fn trunk(&self, g: &mut Graph<T>, p: &Bound, mut f: Var) -> Result<Var> {
        for b in &self.layout.blocks {
            f = c42_block(g, p, f, b)?;
        }
        for e in &self.layout.epix {
            f = epixformer(g, p, f, e, self.cfg.heads, self.cfg.d_max_value())?;
        }
        Ok(f)
    }

    /// Full network. `skip` is the bicubic-upsampled input for SSR networks
    /// built with `bicubic_skip` (see [`Network::skip_tensor`]).
    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, x: Var, skip: Option<Var>) -> Result<Var> {
        let f = self.stem(g, p, x)?;
        let f = self.trunk(g, p, f)?;
        match self.cfg.task {
            Task::Ssr => {
                if self.uses_skip() != skip.is_some() {
                    return Err(LfError::invalid(
                        "bicubic skip input must be given exactly when the network uses it",
                    ));
                }
                ssr_head(g, p, f, &self.layout.head, self.cfg.scale, skip)
            }
            Task::Asr => {
                let out = asr_head(g, p, f, &self.layout.head, self.cfg.a_out)?;
                if self.cfg.copy_inputs {
                    self.copy_inputs(g, x, out)
                } else {
                    Ok(out)
                }
            }
        }
    }

    /// Angular positions of the ASR input views in the output grid.
    pub fn input_positions(&self) -> Vec<(usize, usize)> {
        let a = self.cfg.a_in;
        (0..a * a)
            .map(|k| ((k / a) * self.cfg.stride, (k % a) * self.cfg.stride))
            .collect()
    }

    fn copy_inputs(&self, g: &mut Graph<T>, x: Var, out: Var) -> Result<Var> {
        let os = g.shape(out).to_vec();
        let xs = g.shape(x).to_vec();
        let mut keep = Tensor::full(&os, T::one());
        let mut fill = Tensor::zeros(&os);
        let xv = g.value(x).data().to_vec();
        let plane = os[4] * os[5];
        let ao = self.cfg.a_out;
        for b in 0..os[0] {
            for c in 0..os[1] {
                for (k, &(u, v)) in self.input_positions().iter().enumerate() {
                    let dst = (((b * os[1] + c) * ao + u) * ao + v) * plane;
                    let src = ((b * xs[1] + c) * xs[2] * xs[3] + k) * plane;
                    keep.data_mut()[dst..dst + plane].fill(T::zero());
                    fill.data_mut()[dst..dst + plane].copy_from_slice(&xv[src..src + plane]);
                }
            }
        }
        let keep = g.constant(keep)?;
        let fill = g.constant(fill)?;
        let kept = g.mul(out, keep)?;
        g.add(kept, fill)
    }

    /// Whether [`Network::forward`] expects a bicubic skip input.
    pub fn uses_skip(&self) -> bool {
        self.cfg.task == Task::Ssr && self.cfg.bicubic_skip
    }

    /// Bicubic-upsampled inputs when the network has a skip path.
    pub fn skip_tensor(&self, inputs: &[LightField4D]) -> Result<Option<Tensor<T>>> {
        if !self.uses_skip() {
            return Ok(None);
        }
        let up = inputs
            .iter()
            .map(|lf| resize_lf(lf, self.cfg.scale as f64))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack_lfs(&up).map(Some)
    }

    /// Runs the network on a batch of light fields.
    pub fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>> {
        let mut g = Graph::new();
        let p = self.bind_constant(&mut g)?;
        let x = g.constant(Tensor::stack_lfs(inputs)?)?;
        let skip = match self.skip_tensor(inputs)? {
            Some(t) => Some(g.constant(t)?),
            None => None,
        };
        let y = self.forward(&mut g, &p, x, skip)?;
        g.value(y).to_lfs()
    }

    /// Binds parameters as constants (inference only).
    fn bind_constant(&self, g: &mut Graph<T>) -> Result<Vec<Var>> {
        self.store
            .iter()
            .map(|(_, _, t)| g.constant(t.clone()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let cfg = serde_json::to_value(&self.cfg).expect("config serializes");
        save_checkpoint(path, &self.store, &cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (store, cfg) = load_checkpoint::<T>(path)?;
        let cfg: NetworkConfig = serde_json::from_value(cfg)
            .map_err(|e| LfError::format(path, format!("network config: {e}")))?;
        Self::with_params(cfg, &store)
    }
}
