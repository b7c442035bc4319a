//! Evaluation protocol: reflect-padded tiled inference and metric reports.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{LfError, Result};
use crate::lightfield::{LfDims, LightField4D};
use crate::model::{Network, Task};

use super::data::{asr_input_views, make_asr_pair, make_ssr_pair};
use super::metrics::{score_scene, MetricReport};
use super::resize::resize_lf;

/// Anything that maps a batch of input light fields to predictions whose
/// spatial size is `spatial_scale()` times larger.
pub trait Predictor {
    fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>>;
    fn spatial_scale(&self) -> usize;
}

impl<T: Real> Predictor for Network<T> {
    fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>> {
        Network::predict(self, inputs)
    }

    fn spatial_scale(&self) -> usize {
        self.config().output_scale()
    }
}

/// Returns its input.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Predictor for Identity {
    fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>> {
        Ok(inputs.to_vec())
    }

    fn spatial_scale(&self) -> usize {
        1
    }
}

/// Per-view bicubic upsampling baseline.
#[derive(Debug, Clone, Copy)]
pub struct Bicubic(pub usize);

impl Predictor for Bicubic {
    fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>> {
        inputs.iter().map(|lf| resize_lf(lf, self.0 as f64)).collect()
    }

    fn spatial_scale(&self) -> usize {
        self.0
    }
}

/// Reflection (edge sample not repeated) of index `i` into `0..n`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Spatially extends `lf` by reflection: `top`/`left` samples before the
/// origin, output size `h`×`w`.
pub fn reflect_pad(lf: &LightField4D, top: usize, left: usize, h: usize, w: usize) -> Result<LightField4D> {
    let d = lf.dims();
    LightField4D::from_fn(d.with_spatial(h, w), |c, u, v, y, x| {
        let sy = reflect_index(y as isize - top as isize, d.y);
        let sx = reflect_index(x as isize - left as isize, d.x);
        lf.get(c, u, v, sy, sx)
    })
}

/// Tile geometry for [`predict_tiled`]: each tile of `tile` input pixels
/// keeps its central `tile − 2·margin` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tiling {
    pub tile: usize,
    pub margin: usize,
}

impl Default for Tiling {
    fn default() -> Self {
        Self { tile: 32, margin: 8 }
    }
}

impl Tiling {
    pub fn validate(&self) -> Result<()> {
        if self.tile == 0 || 2 * self.margin >= self.tile {
            return Err(LfError::config(format!(
                "tile {} must exceed twice the margin {}",
                self.tile, self.margin
            )));
        }
        Ok(())
    }

    pub fn core(&self) -> usize {
        self.tile - 2 * self.margin
    }
}

/// Runs `model` over overlapping tiles of a reflect-padded copy of `lf` and
/// stitches the tile centres. Tiles are predicted one batch at a time.
pub fn predict_tiled(model: &dyn Predictor, lf: &LightField4D, tiling: Tiling, batch: usize) -> Result<LightField4D> {
    tiling.validate()?;
    let d = lf.dims();
    let (core, m, s) = (tiling.core(), tiling.margin, model.spatial_scale());
    let (ny, nx) = (d.y.div_ceil(core), d.x.div_ceil(core));
    let padded = reflect_pad(lf, m, m, ny * core + 2 * m, nx * core + 2 * m)?;
    let origins: Vec<(usize, usize)> = (0..ny).flat_map(|i| (0..nx).map(move |j| (i * core, j * core))).collect();
    let mut out: Option<LightField4D> = None;
    for chunk in origins.chunks(batch.max(1)) {
        let tiles = chunk
            .iter()
            .map(|&(y, x)| padded.crop(y, x, tiling.tile, tiling.tile))
            .collect::<Result<Vec<_>>>()?;
        let preds = model.predict(&tiles)?;
        if preds.len() != tiles.len() {
            return Err(LfError::invalid("predictor returned the wrong batch size"));
        }
        for (&(y, x), p) in chunk.iter().zip(&preds) {
            let pd = p.dims();
            if pd.y != tiling.tile * s || pd.x != tiling.tile * s {
                return Err(LfError::shape(format!(
                    "predictor output {pd} does not match tile {} at scale {s}",
                    tiling.tile
                )));
            }
            let o = out.get_or_insert_with(|| {
                let od = LfDims { y: d.y * s, x: d.x * s, ..pd };
                LightField4D::zeros(od).expect("positive dims")
            });
            let od = o.dims();
            let (h, w) = ((core * s).min(od.y - y * s), (core * s).min(od.x - x * s));
            for c in 0..pd.c {
                for u in 0..pd.u {
                    for v in 0..pd.v {
                        for r in 0..h {
                            for q in 0..w {
                                let val = p.get(c, u, v, m * s + r, m * s + q);
                                o.set(c, u, v, y * s + r, x * s + q, val);
                            }
                        }
                    }
                }
            }
        }
    }
    out.ok_or_else(|| LfError::invalid("empty light field"))
}

/// How to derive inputs from ground truth and run the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalProtocol {
    pub task: Task,
    /// Spatial factor for SSR (ignored for ASR).
    pub scale: usize,
    /// `None` predicts whole light fields at once.
    pub tiling: Option<Tiling>,
    pub batch: usize,
}

impl EvalProtocol {
    pub fn ssr(scale: usize) -> Self {
        Self {
            task: Task::Ssr,
            scale,
            tiling: Some(Tiling::default()),
            batch: 4,
        }
    }

    pub fn asr() -> Self {
        Self {
            task: Task::Asr,
            scale: 1,
            tiling: Some(Tiling::default()),
            batch: 4,
        }
    }

    /// Input and ground truth for one scene.
    pub fn make_pair(&self, truth: &LightField4D) -> Result<(LightField4D, LightField4D)> {
        match self.task {
            Task::Ssr => make_ssr_pair(truth, self.scale),
            Task::Asr => make_asr_pair(truth),
        }
    }

    /// Angular positions left out of the metrics.
    pub fn excluded(&self) -> Vec<(usize, usize)> {
        match self.task {
            Task::Ssr => vec![],
            Task::Asr => asr_input_views(),
        }
    }

    pub fn run(&self, model: &dyn Predictor, input: &LightField4D) -> Result<LightField4D> {
        match self.tiling {
            Some(t) => predict_tiled(model, input, t, self.batch),
            None => model.predict(std::slice::from_ref(input))?.pop().ok_or_else(|| LfError::invalid("no prediction")),
        }
    }
}

/// Degrades each ground-truth scene, predicts it and scores the result.
/// Color inputs are scored on luma; the model sees the scene's own channels.
pub fn evaluate(model: &dyn Predictor, scenes: &[(String, LightField4D)], protocol: &EvalProtocol) -> Result<MetricReport> {
    let excluded = protocol.excluded();
    let scores = scenes
        .iter()
        .map(|(name, truth)| {
            let (input, truth) = protocol.make_pair(truth)?;
            let pred = protocol.run(model, &input)?;
            score_scene(name, &pred, &truth, &excluded)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_scenes(scores, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkConfig;
    use crate::pipeline::metrics::psnr;

    fn lf(a: usize, y: usize, x: usize) -> LightField4D {
        LightField4D::from_fn(LfDims::new(1, a, a, y, x), |_, u, v, y, x| {
            0.5 + 0.4 * ((y as f64 * 0.7 + u as f64).sin() * (x as f64 * 0.45 + v as f64 * 0.3).cos())
        })
        .unwrap()
    }

    #[test]
    fn reflection_indices() {
        let got: Vec<usize> = (-4..9).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, [2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2]);
        assert_eq!(reflect_index(-3, 1), 0);
    }

    #[test]
    fn tiled_identity_equals_whole_image() {
        let x = lf(2, 37, 29);
        let t = Tiling { tile: 16, margin: 3 };
        let y = predict_tiled(&Identity, &x, t, 3).unwrap();
        assert_eq!(y, x);
        let (a, b) = (evaluate(&Identity, &[("s".into(), x.clone())], &EvalProtocol { tiling: None, ..EvalProtocol::ssr(1) }).unwrap(),
            evaluate(&Identity, &[("s".into(), x)], &EvalProtocol { tiling: Some(t), ..EvalProtocol::ssr(1) }).unwrap());
        assert!((a.psnr - b.psnr).abs() < 1e-6);
    }

    /// A model whose receptive field fits in the margin gives the same
    /// interior whether run tiled or whole.
    #[test]
    fn tiling_matches_whole_prediction_in_the_interior() {
        let net = Network::<f64>::new(NetworkConfig::ssr(2, 2).toy(4, 1, 0), 3).unwrap();
        let mut net = net;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        crate::model::suite::randomize(net.params_mut(), 0.3, &mut rng);
        let x = lf(2, 20, 20);
        let whole = net.predict(std::slice::from_ref(&x)).unwrap().remove(0);
        let tiled = predict_tiled(&net, &x, Tiling { tile: 14, margin: 4 }, 2).unwrap();
        assert_eq!(whole.dims(), tiled.dims());
        // stem, block (2 convs + angular kernels) and head reach < 4 pixels
        for y in 8..32 {
            for xx in 8..32 {
                let (a, b) = (whole.get(0, 1, 0, y, xx), tiled.get(0, 1, 0, y, xx));
                assert!((a - b).abs() < 1e-10, "{y},{xx}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn asr_protocol_excludes_inputs() {
        let dense = lf(7, 8, 8);
        let p = EvalProtocol { tiling: None, ..EvalProtocol::asr() };
        // nearest corner copy: exact at the corners only
        struct Corners;
        impl Predictor for Corners {
            fn predict(&self, inputs: &[LightField4D]) -> Result<Vec<LightField4D>> {
                inputs
                    .iter()
                    .map(|s| {
                        let d = s.dims();
                        LightField4D::from_fn(d.with_angular(7, 7), |c, u, v, y, x| s.get(c, u / 4, v / 4, y, x))
                    })
                    .collect()
            }
            fn spatial_scale(&self) -> usize {
                1
            }
        }
        let r = evaluate(&Corners, &[("d".into(), dense)], &p).unwrap();
        assert_eq!(r.scenes[0].views.len(), 45);
        assert!(r.scenes[0].views.iter().all(|v| v.psnr < 100.0));
        assert_eq!(r.excluded, asr_input_views());
    }

    #[test]
    fn bicubic_baseline_scores() {
        let truth = lf(2, 32, 32);
        let (lr, hr) = make_ssr_pair(&truth, 2).unwrap();
        let up = Bicubic(2).predict(&[lr]).unwrap().remove(0);
        assert!(psnr(&up.view(0, 0, 0), &hr.view(0, 0, 0)).unwrap() > 25.0);
    }
}
