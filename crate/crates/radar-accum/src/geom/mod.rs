//! Geometric foundation: vectors, rotations, rigid transforms, spherical
//! directions and a nearest-neighbor index.
//!
//! Everything in this module is generic over the scalar type `T: Real`, so it
//! works with both `f32` and `f64`. The crate root re-exports `f64` aliases
//! for pipeline code.

mod align;
mod kdtree;
pub(crate) mod linalg;
mod rotation;
mod spherical;
mod transform;
mod vec3;

pub use align::{align_correspondences, alignment_rms};
pub use kdtree::SpatialIndex;
pub use rotation::{average_quaternions, UnitQuaternion};
pub use spherical::{observation_angle, SphericalDirection};
pub use transform::{mat4_flatten, mat4_from_flat, Matrix4, RigidTransform};
pub use vec3::Vec3;

use num_traits::{Float, FloatConst, NumAssign};
use std::fmt;
use std::iter::Sum;

/// Scalar type for all geometry: an IEEE float with the usual operator set.
pub trait Real: Float + FloatConst + NumAssign + Sum + fmt::Debug + fmt::Display + 'static {}

impl<T> Real for T where T: Float + FloatConst + NumAssign + Sum + fmt::Debug + fmt::Display + 'static {}

/// Pulls an `f64` literal into generic scalar code.
#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from(x).expect("literal not representable in scalar type")
}

#[derive(Debug, thiserror::Error)]
pub enum GeomError {
    #[error("no rotations to average")]
    NoRotations,
    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),
    #[error("at least 3 correspondence pairs required, got {got}")]
    InsufficientCorrespondences { got: usize },
    #[error("correspondence lists differ in length ({src} vs {dst})")]
    MismatchedCorrespondences { src: usize, dst: usize },
    #[error("rotation under-determined: source points are nearly collinear")]
    DegenerateCorrespondences,
    #[error("nearest-neighbor query on an empty index")]
    EmptyIndex,
    #[error("point with non-finite component")]
    NonFinitePoint,
    #[error("not a rigid transform: {0}")]
    NotRigid(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(&'static str),
}
