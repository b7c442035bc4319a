//! File formats: PNG images, PNG view grids, the binary `.lf4d` container,
//! and dataset manifests.
//!
//! `.lf4d` layout (all little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `LF4D`                              |
//! | 20    | `u32` dims `C, U, V, Y, X`                |
//! | 4     | `u32` dtype tag (`1` = float32)           |
//! | 4·N   | `f32` samples in `[c, u, v, y, x]` order  |

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};
use crate::lightfield::{LfDims, LightField4D};
use crate::plane::Plane;

pub const LF4D_MAGIC: &[u8; 4] = b"LF4D";
pub const DTYPE_F32: u32 = 1;

fn image_err(path: &Path, e: image::ImageError) -> LfError {
    match e {
        image::ImageError::IoError(io) => LfError::io(path, io),
        other => LfError::format(path, other.to_string()),
    }
}

/// Reads a PNG as one plane per channel, values scaled to `[0, 1]`.
/// Alpha is dropped; grey images give one plane, colour images three.
pub fn read_png_channels(path: &Path) -> Result<Vec<Plane>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    if color.has_color() {
        let rgb = img.into_rgb32f();
        let mut planes = vec![Plane::zeros(h, w), Plane::zeros(h, w), Plane::zeros(h, w)];
        for (x, y, p) in rgb.enumerate_pixels() {
            for (ch, plane) in planes.iter_mut().enumerate() {
                plane.set(y as usize, x as usize, p.0[ch] as f64);
            }
        }
        Ok(planes)
    } else {
        let g = img.into_luma16();
        let data = g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
        Ok(vec![Plane::new(h, w, data)?])
    }
}

/// Reads a PNG as a single intensity plane (colour input is reduced to
/// BT.601 luma).
pub fn read_png_gray(path: &Path) -> Result<Plane> {
    let mut ch = read_png_channels(path)?;
    if ch.len() == 1 {
        return Ok(ch.pop().expect("one plane"));
    }
    let (r, g, b) = (&ch[0], &ch[1], &ch[2]);
    Plane::new(
        r.rows(),
        r.cols(),
        (0..r.data().len())
            .map(|i| crate::pipeline::luma(r.data()[i], g.data()[i], b.data()[i]))
            .collect(),
    )
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

pub fn write_png_gray8(path: &Path, plane: &Plane) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        plane.cols() as u32,
        plane.rows() as u32,
        plane.data().iter().map(|&v| quantize(v, 255.0) as u8).collect(),
    )
    .ok_or_else(|| LfError::shape("png buffer size"))?;
    buf.save(path).map_err(|e| image_err(path, e))
}

pub fn write_png_gray16(path: &Path, plane: &Plane) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        plane.cols() as u32,
        plane.rows() as u32,
        plane.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect(),
    )
    .ok_or_else(|| LfError::shape("png buffer size"))?;
    DynamicImage::ImageLuma16(buf)
        .save(path)
        .map_err(|e| image_err(path, e))
}

fn write_png_rgb16(path: &Path, planes: [&Plane; 3]) -> Result<()> {
    let n = planes[0].data().len();
    let mut raw = Vec::with_capacity(3 * n);
    for i in 0..n {
        for p in planes {
            raw.push(quantize(p.data()[i], 65535.0) as u16);
        }
    }
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(planes[0].cols() as u32, planes[0].rows() as u32, raw)
            .ok_or_else(|| LfError::shape("png buffer size"))?;
    DynamicImage::ImageRgb16(buf)
        .save(path)
        .map_err(|e| image_err(path, e))
}

pub fn write_lf4d(path: &Path, lf: &LightField4D) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| LfError::io(path, e))?;
    let mut w = BufWriter::new(f);
    let d = lf.dims();
    let mut header = Vec::with_capacity(28);
    header.extend_from_slice(LF4D_MAGIC);
    for v in d.as_array() {
        header.extend_from_slice(&(v as u32).to_le_bytes());
    }
    header.extend_from_slice(&DTYPE_F32.to_le_bytes());
    w.write_all(&header).map_err(|e| LfError::io(path, e))?;
    let mut body = Vec::with_capacity(4 * d.numel());
    for &v in lf.data() {
        body.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&body).map_err(|e| LfError::io(path, e))?;
    w.flush().map_err(|e| LfError::io(path, e))
}

pub fn read_lf4d(path: &Path) -> Result<LightField4D> {
    let f = fs::File::open(path).map_err(|e| LfError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(f)
        .read_to_end(&mut bytes)
        .map_err(|e| LfError::io(path, e))?;
    decode_lf4d(&bytes).map_err(|msg| LfError::format(path, msg))
}

fn decode_lf4d(bytes: &[u8]) -> std::result::Result<LightField4D, String> {
    if bytes.len() < 28 || &bytes[..4] != LF4D_MAGIC {
        return Err("missing LF4D magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let dims = LfDims::new(
        word(0) as usize,
        word(1) as usize,
        word(2) as usize,
        word(3) as usize,
        word(4) as usize,
    );
    if word(5) != DTYPE_F32 {
        return Err(format!("unsupported dtype tag {}", word(5)));
    }
    let body = &bytes[28..];
    if body.len() != 4 * dims.numel() {
        return Err(format!(
            "expected {} payload bytes for {dims}, found {}",
            4 * dims.numel(),
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    LightField4D::new(dims, data).map_err(|e| e.to_string())
}

/// `meta.json` of a PNG view-grid scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "V")]
    pub v: usize,
    pub bit_depth: u8,
}

pub fn view_file_name(u: usize, v: usize) -> String {
    format!("view_u{u}_v{v}.png")
}

/// Writes a 1- or 3-channel light field as `view_u{i}_v{j}.png` files
/// (16-bit) plus `meta.json`.
pub fn write_png_grid(dir: &Path, lf: &LightField4D) -> Result<()> {
    let d = lf.dims();
    if d.c != 1 && d.c != 3 {
        return Err(LfError::shape(format!("PNG grids hold 1 or 3 channels, got {}", d.c)));
    }
    fs::create_dir_all(dir).map_err(|e| LfError::io(dir, e))?;
    for u in 0..d.u {
        for v in 0..d.v {
            let path = dir.join(view_file_name(u, v));
            if d.c == 1 {
                write_png_gray16(&path, &lf.view(0, u, v))?;
            } else {
                let (r, g, b) = (lf.view(0, u, v), lf.view(1, u, v), lf.view(2, u, v));
                write_png_rgb16(&path, [&r, &g, &b])?;
            }
        }
    }
    let meta = GridMeta {
        u: d.u,
        v: d.v,
        bit_depth: 16,
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&path, text).map_err(|e| LfError::io(&path, e))
}

pub fn read_png_grid(dir: &Path) -> Result<LightField4D> {
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| LfError::io(&meta_path, e))?;
    let meta: GridMeta =
        serde_json::from_str(&text).map_err(|e| LfError::format(&meta_path, e.to_string()))?;
    if meta.bit_depth != 8 && meta.bit_depth != 16 {
        return Err(LfError::format(&meta_path, "bit_depth must be 8 or 16"));
    }
    let mut views: Vec<Vec<Plane>> = Vec::with_capacity(meta.u * meta.v);
    for u in 0..meta.u {
        for v in 0..meta.v {
            views.push(read_png_channels(&dir.join(view_file_name(u, v)))?);
        }
    }
    let channels = views.first().map_or(0, |v| v.len());
    if views.iter().any(|v| v.len() != channels) {
        return Err(LfError::format(dir, "views disagree on channel count"));
    }
    let (h, w) = (views[0][0].rows(), views[0][0].cols());
    let dims = LfDims::new(channels, meta.u, meta.v, h, w);
    let mut lf = LightField4D::zeros(dims)?;
    for (i, planes) in views.iter().enumerate() {
        for (c, p) in planes.iter().enumerate() {
            lf.set_view(c, i / meta.v, i % meta.v, p)?;
        }
    }
    Ok(lf)
}

/// Loads one scene: a `.lf4d` file, or a directory holding either a PNG view
/// grid (`meta.json`) or exactly one `.lf4d` file.
pub fn load_scene(path: &Path) -> Result<LightField4D> {
    if path.is_file() {
        return read_lf4d(path);
    }
    if !path.is_dir() {
        return Err(LfError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "scene not found"),
        ));
    }
    if path.join("meta.json").is_file() {
        return read_png_grid(path);
    }
    let mut found: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| LfError::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "lf4d"))
        .collect();
    found.sort();
    match found.as_slice() {
        [one] => read_lf4d(one),
        [] => Err(LfError::format(path, "no meta.json or .lf4d file in scene directory")),
        _ => Err(LfError::format(path, "more than one .lf4d file in scene directory")),
    }
}

/// Dataset manifest: `{"scenes": ["dir_or_file", ...]}` with paths relative
/// to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub scenes: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| LfError::io(path, e))?;
        let m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| LfError::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok((m, base))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| LfError::io(path, e))
    }

    /// Loads every listed scene as `(name, light field)` in manifest order.
    pub fn load_scenes(path: &Path) -> Result<Vec<(String, LightField4D)>> {
        let (m, base) = Self::load(path)?;
        m.scenes
            .iter()
            .map(|p| {
                let full = base.join(p);
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                load_scene(&full).map(|lf| (name, lf))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_lf(c: usize) -> LightField4D {
        let d = LfDims::new(c, 2, 3, 4, 5);
        LightField4D::from_fn(d, |c, u, v, y, x| {
            ((c * 7 + u * 5 + v * 3 + y * 2 + x) % 17) as f64 / 16.0
        })
        .unwrap()
    }

    #[test]
    fn lf4d_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.lf4d");
        let lf = sample_lf(2);
        write_lf4d(&p, &lf).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"LF4D");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), DTYPE_F32);
        assert_eq!(bytes.len(), 28 + 4 * lf.dims().numel());
        assert_eq!(read_lf4d(&p).unwrap(), lf);
        assert_eq!(load_scene(&p).unwrap(), lf);
    }

    #[test]
    fn lf4d_rejects_truncation_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.lf4d");
        write_lf4d(&p, &sample_lf(1)).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_lf4d(&p), Err(LfError::Format { .. })));
        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_lf4d(&p), Err(LfError::Format { .. })));
    }

    #[test]
    fn png_grid_round_trip_within_16bit() {
        let dir = tempfile::tempdir().unwrap();
        for c in [1, 3] {
            let sub = dir.path().join(format!("s{c}"));
            let lf = sample_lf(c);
            write_png_grid(&sub, &lf).unwrap();
            assert!(sub.join("view_u1_v2.png").is_file());
            let back = load_scene(&sub).unwrap();
            assert_eq!(back.dims(), lf.dims());
            let err = back
                .data()
                .iter()
                .zip(lf.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 0.5 / 65535.0 + 1e-9, "err {err}");
        }
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write_lf4d(&dir.path().join("one.lf4d"), &sample_lf(1)).unwrap();
        fs::create_dir(dir.path().join("two")).unwrap();
        write_lf4d(&dir.path().join("two/scene.lf4d"), &sample_lf(1)).unwrap();
        let m = DatasetManifest {
            scenes: vec!["one.lf4d".into(), "two".into()],
        };
        let mp = dir.path().join("manifest.json");
        m.save(&mp).unwrap();
        let scenes = DatasetManifest::load_scenes(&mp).unwrap();
        assert_eq!(scenes.len(), 2);
        assert_eq!(scenes[0].0, "one");
        assert_eq!(scenes[1].0, "two");
    }
}
