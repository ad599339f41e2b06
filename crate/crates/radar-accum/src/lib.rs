//! Accumulation of automotive radar point clouds across frames.
//!
//! A single radar scan is too sparse for most downstream perception tasks, so
//! this crate stacks the last K scans into the current vehicle frame. Doing
//! that well needs two corrections: an ego-motion estimate to undo the
//! vehicle's own movement, and a per-object correction so that moving targets
//! do not leave smear trails. Several interchangeable ego-motion estimators
//! are provided (recorded poses, generalized ICP on lidar or radar, a
//! smoothed ICP variant, radial-velocity RANSAC, and rigid alignment of
//! static tracked boxes), along with two dynamic-object corrections (tracked
//! boxes, radial velocity). A deterministic scene simulator and a symmetric
//! Chamfer distance metric close the loop for evaluation.
//!
//! The geometric core in [`geom`] is generic over the scalar type; the
//! aliases below fix `f64`, which is what the rest of the pipeline uses.

pub mod accumulate;
pub mod dynamics;
pub mod ego_motion;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod synth;

/// 3D vector with `f64` components.
pub type Vec3 = geom::Vec3<f64>;
/// Unit quaternion with `f64` components.
pub type UnitQuaternion = geom::UnitQuaternion<f64>;
/// Rigid transform with `f64` components.
pub type RigidTransform = geom::RigidTransform<f64>;
/// Spherical direction with `f64` components.
pub type SphericalDirection = geom::SphericalDirection<f64>;
/// Nearest-neighbor index over `f64` points.
pub type SpatialIndex = geom::SpatialIndex<f64>;
/// Row-major homogeneous 4x4 matrix with `f64` components.
pub type Matrix4 = geom::Matrix4<f64>;
