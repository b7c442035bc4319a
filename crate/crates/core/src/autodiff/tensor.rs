use crate::error::{LfError, Result};
use crate::layout::numel;
use crate::lightfield::{LfDims, LightField4D};

use super::Real;

/// Dense row-major n-d array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(LfError::shape(format!(
                "tensor shape {shape:?} needs {} values, got {}",
                numel(&shape),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; numel(shape)],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: (0..numel(shape)).map(f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map_values(mut self, f: impl Fn(T) -> T) -> Self {
        self.data.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Wraps a light field as a `[1, C, U, V, Y, X]` batch.
    pub fn from_lf(lf: &LightField4D) -> Self {
        Self::stack_lfs(std::slice::from_ref(lf)).expect("single light field")
    }

    /// Stacks equally shaped light fields into `[B, C, U, V, Y, X]`.
    pub fn stack_lfs(lfs: &[LightField4D]) -> Result<Self> {
        let first = lfs
            .first()
            .ok_or_else(|| LfError::invalid("cannot stack an empty batch"))?
            .dims();
        let mut data = Vec::with_capacity(first.numel() * lfs.len());
        for lf in lfs {
            if lf.dims() != first {
                return Err(LfError::shape(format!(
                    "batch mixes {} and {}",
                    first,
                    lf.dims()
                )));
            }
            data.extend(lf.data().iter().map(|&v| T::of(v)));
        }
        let mut shape = vec![lfs.len()];
        shape.extend(first.as_array());
        Self::new(shape, data)
    }

    /// Splits a `[B, C, U, V, Y, X]` tensor into light fields.
    pub fn to_lfs(&self) -> Result<Vec<LightField4D>> {
        if self.shape.len() != 6 {
            return Err(LfError::shape(format!(
                "expected [B, C, U, V, Y, X], got {:?}",
                self.shape
            )));
        }
        let s = &self.shape;
        let dims = LfDims {
            c: s[1],
            u: s[2],
            v: s[3],
            y: s[4],
            x: s[5],
        };
        self.data
            .chunks(dims.numel().max(1))
            .take(s[0])
            .map(|chunk| LightField4D::new(dims, chunk.iter().map(|v| v.f64()).collect()))
            .collect()
    }
}
