//! PSNR/SSIM on the luma channel and their per-view → per-scene →
//! per-dataset aggregation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LfError, Result};
use crate::lightfield::LightField4D;
use crate::par::map_range;
use crate::plane::Plane;

use super::color::to_luma;

/// Reported PSNR when the two images are identical.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_same(a: &Plane, b: &Plane) -> Result<()> {
    if !a.same_shape(b) || a.data().is_empty() {
        return Err(LfError::shape(format!(
            "metric inputs differ in shape: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

pub fn mse(a: &Plane, b: &Plane) -> Result<f64> {
    check_same(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(s / a.data().len() as f64)
}

/// `10·log10(1/MSE)` for data range 1, capped at [`PSNR_CAP`].
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP))
}

/// Normalised 1D Gaussian of odd length `n`.
pub fn gaussian_window(n: usize, sigma: f64) -> Vec<f64> {
    let h = (n / 2) as f64;
    let w: Vec<f64> = (0..n)
        .map(|i| (-(i as f64 - h).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Window length used for an image of the given size: 11, or the largest
/// odd length that fits.
pub fn ssim_window_len(rows: usize, cols: usize) -> usize {
    let m = rows.min(cols).min(SSIM_WINDOW);
    if m % 2 == 0 {
        m - 1
    } else {
        m
    }
}

/// Separable valid-mode filtering.
fn filter_valid(p: &[f64], rows: usize, cols: usize, w: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = w.len();
    let (or, oc) = (rows - n + 1, cols - n + 1);
    let mut tmp = vec![0.0; rows * oc];
    for r in 0..rows {
        for c in 0..oc {
            tmp[r * oc + c] = (0..n).map(|k| w[k] * p[r * cols + c + k]).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = (0..n).map(|k| w[k] * tmp[(r + k) * oc + c]).sum();
        }
    }
    (out, or, oc)
}

/// Mean SSIM over all fully-inside Gaussian windows (data range 1).
pub fn ssim(a: &Plane, b: &Plane) -> Result<f64> {
    check_same(a, b)?;
    let (rows, cols) = (a.rows(), a.cols());
    let w = gaussian_window(ssim_window_len(rows, cols), SSIM_SIGMA);
    let f = |p: &[f64]| filter_valid(p, rows, cols, &w).0;
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (ad, bd) = (a.data(), b.data());
    let (ma, mb) = (f(ad), f(bd));
    let (saa, sbb, sab) = (f(&prod(ad, ad)), f(&prod(bd, bd)), f(&prod(ad, bd)));
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut total = 0.0;
    for i in 0..ma.len() {
        let (mx, my) = (ma[i], mb[i]);
        let vx = saa[i] - mx * mx;
        let vy = sbb[i] - my * my;
        let cxy = sab[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / ma.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub u: usize,
    pub v: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScore {
    pub name: String,
    pub views: Vec<ViewScore>,
    pub psnr: f64,
    pub ssim: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Scores every view of `pred` against `truth` on the Y channel, skipping
/// the angular positions in `excluded`, and averages them.
pub fn score_scene(name: &str, pred: &LightField4D, truth: &LightField4D, excluded: &[(usize, usize)]) -> Result<SceneScore> {
    if pred.dims() != truth.dims() {
        return Err(LfError::shape(format!(
            "scene {name}: prediction {} vs ground truth {}",
            pred.dims(),
            truth.dims()
        )));
    }
    let (py, ty) = (to_luma(pred)?, to_luma(truth)?);
    let d = py.dims();
    let positions: Vec<(usize, usize)> = (0..d.u)
        .flat_map(|u| (0..d.v).map(move |v| (u, v)))
        .filter(|p| !excluded.contains(p))
        .collect();
    if positions.is_empty() {
        return Err(LfError::invalid(format!("scene {name}: every view is excluded")));
    }
    let views = map_range(positions.len(), |i| {
        let (u, v) = positions[i];
        let (a, b) = (py.view(0, u, v), ty.view(0, u, v));
        Ok(ViewScore {
            u,
            v,
            psnr: psnr(&a, &b)?,
            ssim: ssim(&a, &b)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SceneScore {
        name: name.to_string(),
        psnr: mean(views.iter().map(|s| s.psnr)),
        ssim: mean(views.iter().map(|s| s.ssim)),
        views,
    })
}

/// Dataset metrics: mean over scenes of the per-scene view means.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Sorted by name so the aggregate does not depend on input order.
    pub scenes: Vec<SceneScore>,
    pub excluded: Vec<(usize, usize)>,
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn from_scenes(mut scenes: Vec<SceneScore>, excluded: Vec<(usize, usize)>) -> Result<Self> {
        if scenes.is_empty() {
            return Err(LfError::invalid("metric report needs at least one scene"));
        }
        scenes.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self {
            psnr: mean(scenes.iter().map(|s| s.psnr)),
            ssim: mean(scenes.iter().map(|s| s.ssim)),
            scenes,
            excluded,
        })
    }

    /// `level,scene,u,v,psnr,ssim` rows: views, then scene means, then the
    /// dataset mean.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,scene,u,v,psnr,ssim\n");
        for sc in &self.scenes {
            for v in &sc.views {
                let _ = writeln!(s, "view,{},{},{},{:.6},{:.6}", sc.name, v.u, v.v, v.psnr, v.ssim);
            }
        }
        for sc in &self.scenes {
            let _ = writeln!(s, "scene,{},,,{:.6},{:.6}", sc.name, sc.psnr, sc.ssim);
        }
        let _ = writeln!(s, "dataset,,,,{:.6},{:.6}", self.psnr, self.ssim);
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| LfError::io(path, e))
    }
}
