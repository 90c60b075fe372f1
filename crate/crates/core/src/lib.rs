//! Dense 3D reconstruction from multi-beam imaging sonar.
//!
//! Sonar intensities are integrated into a voxel grid of viewpoint-binned
//! features, two small 1D CNNs learn per-cell in-band classification and
//! signed distance + surface direction from sparse DVL-derived labels, and
//! their predictions are fused into a TSDF that is meshed by marching cubes.

pub mod container;
pub mod error;
pub mod eval;
pub mod feature_grid;
pub mod geometry;
pub mod grid;
pub mod nn;
pub mod pipeline;
pub mod reconstruction;
pub mod sim;
pub mod training;
pub mod tsdf;

pub use error::{Error, Result};
