//! Next-best-view voxel coverage simulation.
//!
//! The crate is organised around the pieces of an active-reconstruction loop:
//!
//! - [`voxel_grid`]: the cumulative belief (occupancy plus six-face visibility).
//! - [`scene`]: mesh loading, placement, voxelization and the ground-truth surface.
//! - [`camera`]: pinhole poses, BVH ray casting and depth unprojection.
//! - [`env`]: the stepping environment with rewards, penalties and collision-free projection.
//! - [`planners`]: random, frontier and greedy-oracle view planners.
//! - [`metrics`]: coverage ratio, Chamfer distance and AUC.
//! - [`theory`]: coupon-collector closed forms and Monte-Carlo experiments.
//! - [`protocol`]: newline-delimited JSON environment server.
//! - [`bench`]: dataset preparation, benchmark runs and artifact export.

pub mod bench;
pub mod camera;
pub mod env;
pub mod metrics;
pub mod planners;
pub mod protocol;
pub mod scene;
pub mod theory;
pub mod voxel_grid;

/// World-space point, meters.
pub type Point = nalgebra::Point3<f64>;
/// World-space vector, meters.
pub type Vec3 = nalgebra::Vector3<f64>;

pub use camera::{DepthImage, GrayImage, Intrinsics, Pose};
pub use env::{EnvConfig, Environment, Observation, StepResult};
pub use scene::{GroundTruth, Scene, SceneConfig, TriangleMesh};
pub use voxel_grid::{Face, FaceMask, GridFrame, VoxelGrid, VoxelIndex, VoxelState};
