//! Rendering-free silhouette fitting for 3D point clouds.
//!
//! Point clouds are reconstructed from multi-view binary silhouettes by
//! minimizing a per-projection objective directly, without rasterizing the
//! cloud:
//!
//! - [`silhouette`]: binary masks, exact Euclidean distance transform, the
//!   smoothed silhouette field and bilinear sampling with analytic gradients.
//! - [`camera`]: 3x4 projection matrices, perspective projection and its
//!   Jacobian.
//! - [`loss`]: unary silhouette terms, structure-aware repulsion and the
//!   total objective with per-point 3D gradients.
//! - [`fitter`]: Adam over free point positions, traces and checkpoints.
//! - [`scenegen`]: synthetic shapes, camera rigs and silhouette rasterization.
//! - [`metrics`]: Chamfer distance, voxel IoU and coverage statistics.
//! - [`io`]: PGM/PNG masks, PLY/XYZ/OBJ geometry and camera rig files.

pub mod adam;
pub mod camera;
pub mod error;
pub mod fitter;
pub mod grid;
pub mod io;
pub mod kdtree;
pub mod loss;
pub mod metrics;
pub mod scenegen;
pub mod silhouette;

pub use camera::{Camera, PointCloud};
pub use error::{Error, Result};
pub use fitter::{fit, resume, FitConfig, FitTrace, Init};
pub use grid::Grid;
pub use loss::{evaluate, LossConfig, LossReport, UnaryMode, View};
pub use silhouette::{SilhouetteImage, SmoothSilhouette};

/// 3D vector type used for points and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2D vector type used for image-plane positions and gradients.
pub type Vec2 = nalgebra::Vector2<f64>;
