//! Differentiable free-form deformation of point clouds.
//!
//! The crate is `no_std` and only needs `alloc`. It provides:
//!
//! * [`geometry`]: point clouds, triangle meshes, surface sampling, normalization,
//!   resampling and voxelization.
//! * [`ffd`]: trivariate Bernstein lattices, deformation and the gradient of a loss
//!   with respect to control-point offsets.
//! * [`metrics`]: Chamfer and Earth Mover's distances, an exact k-d tree and a
//!   Hungarian assignment solver.
//! * [`regularizers`]: displacement L1 and lattice smoothness penalties.
//! * [`fit`]: Adam-driven template-to-target fitting.
//! * [`retrieval`]: shape descriptors, a linear embedding trained with the lifted
//!   structured loss, and K-nearest-neighbor template lookup.
//!
//! File formats and the command line live in the companion `ffd` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;
mod vec3;

pub mod ffd;
pub mod fit;
pub mod geometry;
pub mod kdtree;
pub mod metrics;
pub mod regularizers;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
pub use vec3::{Aabb, Vec3};
