//! Panoramic 3D reconstruction core: equirectangular/perspective geometry,
//! RGBD point-cloud fusion with depth-scale alignment, and an isotropic
//! Gaussian splatting renderer with analytic gradients.
//!
//! The crate is `no_std` (with `alloc`); all operations are pure functions
//! over in-memory buffers. File formats and the CLI live in the companion
//! `panosplat-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod geometry;
pub mod image;
pub mod math;
pub mod metrics;
pub mod pointcloud;
pub mod splat;
pub mod synth;

pub use error::{Error, Result};
