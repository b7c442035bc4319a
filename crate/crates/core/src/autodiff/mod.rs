//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records each operation together with its output; calling
//! [`Graph::backward`] on a scalar sweeps the tape once in reverse. Only the
//! operators the light-field networks need are provided. Graphs run at `f32`
//! for training and `f64` for finite-difference checks; see [`Real`].

mod adam;
mod checkpoint;
mod conv;
mod gradcheck;
mod graph;
mod params;
mod real;
pub mod suite;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use conv::Conv2dSpec;
pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use params::{kaiming_uniform, ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
