//! Light-field processing toolkit.
//!
//! * [`lightfield`] – the canonical `[c, u, v, y, x]` container and exact
//!   rearrangements into the six coordinate-pair subspaces.
//! * [`optics`] – a layered Lambertian renderer and analytic geometry helpers.
//! * [`autodiff`] – a small reverse-mode engine with the operators the
//!   networks need.
//! * [`model`] – subspace convolution blocks, the X-masked EPI transformer and
//!   the spatial/angular super-resolution networks.
//! * [`pipeline`] – degradation, metrics, training and evaluation.

pub mod autodiff;
pub mod error;
pub mod layout;
pub mod model;
pub mod lightfield;
pub mod par;
pub mod plane;

pub use error::{LfError, Result};
pub use lightfield::{LfDims, LightField4D, SubspaceId};
pub use plane::Plane;
pub mod io;
pub mod optics;
pub mod pipeline;
