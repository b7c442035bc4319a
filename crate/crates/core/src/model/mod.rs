//! Light-field super-resolution networks.
//!
//! Features travel as `[B, C, U, V, Y, X]` tensors. The trunk stacks
//! six-subspace convolution blocks ([`c42_block`]) and EPI transformers
//! ([`epixformer`]) whose attention is restricted by the X-shaped slope mask
//! ([`build_xmask`]). Heads produce a spatially ([`ssr_head`]) or angularly
//! ([`asr_head`]) upsampled light field.

mod c42;
mod config;
mod epix;
mod heads;
mod layers;
mod network;
pub mod suite;
mod xmask;

pub use c42::{branch_forward, branch_ids, branch_kernel, c42_block, BranchParams, C42Params};
pub use config::{NetworkConfig, Task};
pub use epix::{epi_pass, epixformer, mhxa, EpiPass, EpixParams, MhxaParams};
pub use heads::{asr_head, pixel_shuffle, ssr_head};
pub use layers::{Bound, ConvParams, Init, LRELU_SLOPE};
pub use network::Network;
pub use xmask::{admits, admitted_count, build_xmask};

#[cfg(test)]
mod tests;
