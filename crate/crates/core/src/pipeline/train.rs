//! L1/Adam training with a step-halved learning rate, CSV logs and
//! per-epoch checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Graph, Real, Tensor};
use crate::error::{LfError, Result};
use crate::lightfield::LightField4D;
use crate::model::{Network, Task};

use super::color::to_luma;
use super::data::{asr_input_views, asr_patch_pairs, random_augment, ssr_patch_pairs, Pair};
use super::metrics::score_scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub task: Task,
    /// Spatial factor (SSR only).
    pub scale: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_halving_epochs: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Ground-truth patch side.
    pub patch_size: usize,
    /// Patch grid step; 0 means `patch_size`.
    pub patch_stride: usize,
    pub augment: bool,
    /// Stops after this many optimiser steps (all epochs when unset).
    pub max_steps: Option<usize>,
    /// Stops as soon as a step's loss falls below this value.
    pub target_loss: Option<f64>,
    /// Checkpoint every this many epochs; 0 disables checkpoints.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::ssr(2)
    }
}

impl TrainConfig {
    /// Published spatial settings: batch 8, 64 px patches for ×2 and
    /// 128 px for ×4.
    pub fn ssr(scale: usize) -> Self {
        Self {
            task: Task::Ssr,
            scale,
            batch_size: 8,
            lr: 2e-4,
            lr_halving_epochs: 15,
            epochs: 80,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patch_size: if scale >= 4 { 128 } else { 64 },
            patch_stride: 0,
            augment: true,
            max_steps: None,
            target_loss: None,
            checkpoint_every: 1,
            seed: 0,
        }
    }

    /// Published angular settings: batch 4.
    pub fn asr() -> Self {
        Self {
            task: Task::Asr,
            scale: 1,
            batch_size: 4,
            patch_size: 64,
            ..Self::ssr(2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("scale", self.scale),
            ("batch_size", self.batch_size),
            ("lr_halving_epochs", self.lr_halving_epochs),
            ("epochs", self.epochs),
            ("patch_size", self.patch_size),
        ];
        if let Some((k, _)) = pos.iter().find(|(_, v)| *v == 0) {
            return Err(LfError::config(format!("train.{k} must be positive")));
        }
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.lr > 0.0 && self.lr.is_finite()) || !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(LfError::config("lr, betas and eps must be positive (betas below 1)"));
        }
        if self.task == Task::Ssr && self.patch_size % self.scale != 0 {
            return Err(LfError::config(format!(
                "patch size {} is not divisible by scale {}",
                self.patch_size, self.scale
            )));
        }
        if self.max_steps == Some(0) {
            return Err(LfError::config("train.max_steps must be positive"));
        }
        Ok(())
    }

    /// `lr · 0.5^⌊epoch / period⌋` with 0-indexed epochs.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr * 0.5f64.powi((epoch / self.lr_halving_epochs) as i32)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    fn stride(&self) -> usize {
        if self.patch_stride == 0 {
            self.patch_size
        } else {
            self.patch_stride
        }
    }

    /// Luma patches and their degraded inputs, scene by scene.
    pub fn make_pairs(&self, scenes: &[LightField4D]) -> Result<Vec<Pair>> {
        let mut out = Vec::new();
        for lf in scenes {
            let y = to_luma(lf)?;
            out.extend(match self.task {
                Task::Ssr => ssr_patch_pairs(&y, self.scale, self.patch_size, self.stride())?,
                Task::Asr => asr_patch_pairs(&y, self.patch_size, self.stride())?,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub steps: Vec<StepLog>,
    pub validation: Vec<EpochLog>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }
}

fn stack<T: Real>(lfs: Vec<&LightField4D>) -> Result<Tensor<T>> {
    let owned: Vec<LightField4D> = lfs.into_iter().cloned().collect();
    Ok(Tensor::<f64>::stack_lfs(&owned)?.cast())
}

/// One optimiser step on `batch`; returns the L1 loss before the update.
pub fn train_step<T: Real>(net: &mut Network<T>, adam: &mut AdamState<T>, batch: &[Pair]) -> Result<f64> {
    let inputs: Vec<LightField4D> = batch.iter().map(|p| p.input.clone()).collect();
    let mut g = Graph::new();
    let params = net.bind(&mut g)?;
    let x = g.constant(stack(batch.iter().map(|p| &p.input).collect())?)?;
    let skip = match net.skip_tensor(&inputs)? {
        Some(t) => Some(g.constant(t)?),
        None => None,
    };
    let y = net.forward(&mut g, &params, x, skip)?;
    let t = g.constant(stack(batch.iter().map(|p| &p.target).collect())?)?;
    let loss = g.l1_loss(y, t)?;
    let value = g.value(loss).data()[0].f64();
    if !value.is_finite() {
        return Err(LfError::NonFinite("l1_loss"));
    }
    let grads = g.backward(loss)?;
    let pg = g.param_grads(&grads, net.params());
    adam.step(net.params_mut(), &pg)?;
    Ok(value)
}

/// Mean luma PSNR/SSIM of `net` on validation pairs.
pub fn validate_pairs<T: Real>(net: &Network<T>, pairs: &[Pair], batch: usize) -> Result<(f64, f64)> {
    let excluded = match net.config().task {
        Task::Ssr => vec![],
        Task::Asr => asr_input_views(),
    };
    let (mut ps, mut ss) = (0.0, 0.0);
    for chunk in pairs.chunks(batch.max(1)) {
        let inputs: Vec<LightField4D> = chunk.iter().map(|p| p.input.clone()).collect();
        for (pred, p) in net.predict(&inputs)?.iter().zip(chunk) {
            let s = score_scene("val", pred, &p.target, &excluded)?;
            ps += s.psnr;
            ss += s.ssim;
        }
    }
    let n = pairs.len() as f64;
    Ok((ps / n, ss / n))
}

struct Logs {
    loss: BufWriter<File>,
    val: BufWriter<File>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| LfError::io(path, e))
}

/// Trains `net` on `pairs`. Deterministic for a given config: shuffling
/// and augmentation draw from a generator seeded with `cfg.seed`.
///
/// With `out_dir`, writes `loss.csv` (`step,epoch,lr,loss`), `val.csv`
/// (`epoch,psnr,ssim`) and `epoch_NNNN.lfck` checkpoints.
pub fn train<T: Real>(
    net: &mut Network<T>,
    pairs: &[Pair],
    val: &[Pair],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(LfError::invalid("no training pairs"));
    }
    if net.config().task != cfg.task {
        return Err(LfError::config("network and training task differ"));
    }
    let mut logs = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| LfError::io(d, e))?;
            let mut l = Logs {
                loss: create(&d.join("loss.csv"))?,
                val: create(&d.join("val.csv"))?,
            };
            let io = |e| LfError::io(d, e);
            writeln!(l.loss, "step,epoch,lr,loss").map_err(io)?;
            writeln!(l.val, "epoch,psnr,ssim").map_err(io)?;
            Some(l)
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(net.params(), cfg.adam());
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        adam.set_lr(lr);
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let step = report.steps.len();
            let batch = idx
                .iter()
                .map(|&i| if cfg.augment { random_augment(&pairs[i], &mut rng) } else { Ok(pairs[i].clone()) })
                .collect::<Result<Vec<_>>>()?;
            let loss = train_step(net, &mut adam, &batch).map_err(|e| match e {
                LfError::NonFinite(_) => LfError::Diverged(format!("step {step} (epoch {epoch}, lr {lr:e}): {e}")),
                e => e,
            })?;
            report.steps.push(StepLog { step, epoch, lr, loss });
            if let (Some(l), Some(d)) = (logs.as_mut(), out_dir) {
                writeln!(l.loss, "{step},{epoch},{lr:e},{loss:.8}").map_err(|e| LfError::io(d, e))?;
            }
            if report.steps.len() >= limit || cfg.target_loss.is_some_and(|t| loss < t) {
                finish_epoch(net, val, cfg, epoch, out_dir, logs.as_mut(), &mut report)?;
                break 'epochs;
            }
        }
        finish_epoch(net, val, cfg, epoch, out_dir, logs.as_mut(), &mut report)?;
    }
    if let (Some(l), Some(d)) = (logs.as_mut(), out_dir) {
        l.loss.flush().map_err(|e| LfError::io(d, e))?;
        l.val.flush().map_err(|e| LfError::io(d, e))?;
    }
    Ok(report)
}

fn finish_epoch<T: Real>(
    net: &Network<T>,
    val: &[Pair],
    cfg: &TrainConfig,
    epoch: usize,
    out_dir: Option<&Path>,
    logs: Option<&mut Logs>,
    report: &mut TrainReport,
) -> Result<()> {
    if !val.is_empty() {
        let (psnr, ssim) = validate_pairs(net, val, cfg.batch_size)?;
        report.validation.push(EpochLog { epoch, psnr, ssim });
        if let (Some(l), Some(d)) = (logs, out_dir) {
            writeln!(l.val, "{epoch},{psnr:.6},{ssim:.6}").map_err(|e| LfError::io(d, e))?;
            l.val.flush().map_err(|e| LfError::io(d, e))?;
            l.loss.flush().map_err(|e| LfError::io(d, e))?;
        }
    }
    if let Some(d) = out_dir {
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            let p = d.join(format!("epoch_{epoch:04}.lfck"));
            net.save(&p)?;
            report.checkpoints.push(p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::LfDims;
    use crate::model::NetworkConfig;

    #[test]
    fn learning_rate_halves_every_fifteen_epochs() {
        let cfg = TrainConfig::ssr(2);
        assert_eq!(cfg.lr_at_epoch(0), 2e-4);
        assert_eq!(cfg.lr_at_epoch(14), 2e-4);
        assert_eq!(cfg.lr_at_epoch(16), 1e-4);
        let drops: Vec<usize> = (1..cfg.epochs).filter(|&e| cfg.lr_at_epoch(e) < cfg.lr_at_epoch(e - 1)).collect();
        assert_eq!(drops, [15, 30, 45, 60, 75]);
    }

    #[test]
    fn config_checks() {
        assert_eq!(TrainConfig::ssr(4).patch_size, 128);
        assert_eq!(TrainConfig::asr().batch_size, 4);
        assert!(TrainConfig { patch_size: 30, scale: 4, ..TrainConfig::ssr(4) }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::ssr(2) }.validate().is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "task": "asr"}"#).unwrap();
        assert_eq!((c.epochs, c.task), (3, Task::Asr));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }

    fn toy_pairs(n: usize) -> Vec<Pair> {
        let hr: Vec<LightField4D> = (0..n)
            .map(|k| {
                LightField4D::from_fn(LfDims::new(1, 2, 2, 8, 8), |_, u, v, y, x| {
                    0.5 + 0.3 * ((x as f64 * 0.9 + k as f64 + u as f64 * 0.2).sin() * (y as f64 * 0.6 - v as f64 * 0.2).cos())
                })
                .unwrap()
            })
            .collect();
        TrainConfig { patch_size: 8, ..TrainConfig::ssr(2) }.make_pairs(&hr).unwrap()
    }

    fn tiny(cfg: &TrainConfig, dir: Option<&Path>) -> (Network<f32>, TrainReport) {
        let mut net = Network::<f32>::new(NetworkConfig::ssr(2, 2).toy(4, 1, 1), 5).unwrap();
        let pairs = toy_pairs(3);
        let r = train(&mut net, &pairs, &pairs[..1], cfg, dir).unwrap();
        (net, r)
    }

    #[test]
    fn training_is_deterministic_and_logs() {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            lr: 1e-3,
            ..TrainConfig::ssr(2)
        };
        let dir = tempfile::tempdir().unwrap();
        let (a, ra) = tiny(&cfg, Some(dir.path()));
        let (b, rb) = tiny(&cfg, None);
        assert_eq!(ra.steps, rb.steps);
        assert_eq!(a, b);
        assert_eq!(ra.steps.len(), 6);
        assert_eq!(ra.validation.len(), 3);
        assert_eq!(ra.checkpoints.len(), 3);
        let loss_csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
        assert_eq!(loss_csv.lines().count(), 7);
        let last = Network::<f32>::load(&ra.checkpoints[2]).unwrap();
        assert_eq!(last, a);
        let (_, rc) = tiny(&TrainConfig { seed: 1, ..cfg.clone() }, None);
        assert_ne!(rc.steps, ra.steps);
        let (_, rd) = tiny(&TrainConfig { max_steps: Some(4), ..cfg.clone() }, None);
        assert_eq!(rd.steps.len(), 4);
        let stop = ra.steps[2].loss;
        let (_, re) = tiny(&TrainConfig { target_loss: Some(stop * (1.0 + 1e-6)), ..cfg }, None);
        assert!(re.steps.len() <= 3 && re.final_loss().unwrap() <= stop * (1.0 + 1e-6));
    }

    #[test]
    fn blown_up_learning_rate_is_reported() {
        let mut net = Network::<f32>::new(NetworkConfig::ssr(2, 2).toy(4, 1, 0), 5).unwrap();
        let pairs = toy_pairs(2);
        let stem = net.params().find("stem.w").unwrap();
        net.params_mut().get_mut(stem).data_mut()[0] = f32::NAN;
        let err = train(&mut net, &pairs, &[], &TrainConfig { epochs: 1, ..TrainConfig::ssr(2) }, None).unwrap_err();
        assert!(matches!(err, LfError::Diverged(_)), "{err}");
        assert!(err.to_string().contains("step 0"));
    }
}
