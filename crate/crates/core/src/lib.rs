//! Core library for `colocov`: a synthetic-colonoscopy coverage toolkit.
//!
//! The crate builds colon worlds (tube mesh + lumen centerline), simulates
//! camera pullback trajectories, renders ground-truth depth by ray casting,
//! and computes surface-coverage quantities exactly from the geometry. On
//! top of that sit deterministic evaluators for depth estimates (scale-fit
//! relative error, depth ordering) and for view-synthesis reprojection.
//!
//! Main pieces:
//!
//! - [`lumen`] / [`mesh`] / [`world`] — colon geometry and the arc-length
//!   projection of points onto the lumen centerline.
//! - [`gen`] — procedural world and trajectory generation, seeded.
//! - [`camera`] / [`image`] / [`render`] — pinhole model, depth/RGB grids,
//!   BVH ray casting and per-frame vertex visibility.
//! - [`coverage`] — maximal/actual visible sets and the coverage ratio.
//! - [`view_synthesis`] — rigid pixel warp, backward-warp view synthesis,
//!   photometric + depth-consistency losses with SSIM.
//! - [`metrics`] — depth-evaluation metrics and moment-matching feature
//!   alignment.
//! - [`io`] / [`dataset`] — file formats and labeled segment export.

pub mod align;
pub mod camera;
pub mod coverage;
pub mod dataset;
pub mod error;
pub mod gen;
pub mod image;
pub mod io;
pub mod lumen;
pub mod mesh;
pub mod metrics;
pub mod render;
pub mod view_synthesis;
pub mod world;

pub use error::{Error, Result};

/// 3-vector in world units (1 unit = 1 cm unless a world says otherwise).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Dense 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
