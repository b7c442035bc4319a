//! Dense 2D and 3D real arrays used for images, slices and textures.

use crate::error::{LfError, Result};

/// Row-major 2D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(LfError::shape(format!(
                "plane {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Plane {
        Plane::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integer positions), clamping to the border pixels.
    pub fn sample_bilinear(&self, r: f64, c: f64) -> f64 {
        let rmax = (self.rows - 1) as f64;
        let cmax = (self.cols - 1) as f64;
        let r = r.clamp(0.0, rmax);
        let c = c.clamp(0.0, cmax);
        let r0 = r.floor();
        let c0 = c.floor();
        let fr = r - r0;
        let fc = c - c0;
        let r0 = r0 as usize;
        let c0 = c0 as usize;
        let r1 = (r0 + 1).min(self.rows - 1);
        let c1 = (c0 + 1).min(self.cols - 1);
        let top = self.get(r0, c0) * (1.0 - fc) + self.get(r0, c1) * fc;
        let bot = self.get(r1, c0) * (1.0 - fc) + self.get(r1, c1) * fc;
        top * (1.0 - fr) + bot * fr
    }
}

/// Row-major `[channels, rows, cols]` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array3 {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Array3 {
    pub fn new(channels: usize, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if channels * rows * cols != data.len() {
            return Err(LfError::shape(format!(
                "array {channels}x{rows}x{cols} needs {} values, got {}",
                channels * rows * cols,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            rows,
            cols,
            data,
        })
    }

    #[inline]
    pub fn get(&self, ch: usize, r: usize, c: usize) -> f64 {
        self.data[(ch * self.rows + r) * self.cols + c]
    }
}
