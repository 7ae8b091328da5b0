//! Virtual fringe-projection profilometry.
//!
//! Renders fringe images and ground-truth depth maps of triangle meshes in
//! a simulated camera/projector rig, recovers depth from rendered fringe
//! stacks with classical phase-shifting demodulation, and evaluates
//! depth predictions with the SSIM/Laplacian loss family.
//!
//! - [`scene`]: meshes, pinhole devices, object pose schedule.
//! - [`fringe`]: pattern synthesis and projective texture lookup.
//! - [`render`]: ray-cast fringe and depth rendering.
//! - [`demod`]: phase retrieval, temporal unwrapping, triangulation.
//! - [`metrics`]: SSIM, Laplacian loss, composite losses, MAE/MSDE.
//! - [`datasetgen`]: parameter recipes, splits, dataset builds.
//! - [`cli`]: command-line front end.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod datasetgen;
pub mod demod;
pub mod error;
pub mod fringe;
pub mod imageio;
pub mod metrics;
pub mod raster;
pub mod render;
pub mod scene;

pub use error::{Error, Result};
pub use raster::Raster;
