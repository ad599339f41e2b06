//! Accumulation-quality metrics.
//!
//! The headline metric is the symmetric Chamfer distance between the
//! previous frame's lidar scan, mapped forward by an ego-motion estimate,
//! and the current scan: the better the estimate, the closer the overlap.
//! No annotations are needed, so the same number works on real recordings.

use crate::ego_motion::EgoMotionEstimate;
use crate::geom::GeomError;
use crate::io::{IoError, PointLike, Sequence};
use crate::{RigidTransform, SpatialIndex, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("chamfer distance needs non-empty clouds: {which} side is empty")]
    EmptyCloud { which: &'static str },
    #[error("static mask covers {got} points but the cloud has {expected}")]
    MaskLengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-neighbor distances. Meters; zero iff the clouds cover the same
/// positions.
///
/// Distances are summed in sorted order, so the result is identical (to the
/// bit) under any permutation of either cloud.
pub fn chamfer_symmetric(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::EmptyCloud { which: "first" });
    }
    if b.is_empty() {
        return Err(MetricsError::EmptyCloud { which: "second" });
    }
    Ok((directed_mean(a, b)? + directed_mean(b, a)?) / 2.0)
}

fn directed_mean(from: &[Vec3], to: &[Vec3]) -> Result<f64, MetricsError> {
    let index = SpatialIndex::build(to.to_vec())?;
    let mut distances = Vec::with_capacity(from.len());
    for &p in from {
        distances.push(index.nearest(p)?.1);
    }
    distances.sort_by(f64::total_cmp);
    Ok(distances.iter().sum::<f64>() / from.len() as f64)
}

/// Scores an ego-motion estimate on a sequence: the previous frame's lidar
/// points are mapped into the current ego frame through the estimate and
/// compared to the current scan with [`chamfer_symmetric`].
///
/// `static_masks`, when given, restrict both scans to points flagged `true`
/// (their static subsets), so moving objects do not dominate the distance.
/// Each mask must be parallel to its frame's lidar points.
pub fn scd_of_correction(
    seq: &Sequence,
    estimate: &EgoMotionEstimate,
    static_masks: Option<(&[bool], &[bool])>,
) -> Result<f64, MetricsError> {
    let mounting = seq.lidar_mounting()?;
    let prev = seq.frame(estimate.from_frame)?;
    let cur = seq.frame(estimate.to_frame)?;
    let (mask_prev, mask_cur) = match static_masks {
        Some((p, c)) => {
            if p.len() != prev.lidar.len() {
                return Err(MetricsError::MaskLengthMismatch {
                    expected: prev.lidar.len(),
                    got: p.len(),
                });
            }
            if c.len() != cur.lidar.len() {
                return Err(MetricsError::MaskLengthMismatch {
                    expected: cur.lidar.len(),
                    got: c.len(),
                });
            }
            (Some(p), Some(c))
        }
        None => (None, None),
    };
    let select = |points: &[crate::io::LidarPoint], mask: Option<&&[bool]>| -> Vec<Vec3> {
        points
            .iter()
            .enumerate()
            .filter(|(i, _)| mask.map_or(true, |m| m[*i]))
            .map(|(_, p)| p.position())
            .collect()
    };
    let moved: Vec<Vec3> = select(&prev.lidar, mask_prev.as_ref())
        .into_iter()
        .map(|p| estimate.transform.apply(mounting.apply(p)))
        .collect();
    let reference: Vec<Vec3> = select(&cur.lidar, mask_cur.as_ref())
        .into_iter()
        .map(|p| mounting.apply(p))
        .collect();
    chamfer_symmetric(&moved, &reference)
}

/// Estimate-versus-truth error split into its translation and rotation parts.
#[derive(Clone, Copy, Debug)]
pub struct EgoMotionError {
    /// Euclidean distance between the translations, meters.
    pub translation_m: f64,
    /// Geodesic angle between the rotations, degrees.
    pub rotation_deg: f64,
}

pub fn ego_motion_error(estimate: &RigidTransform, truth: &RigidTransform) -> EgoMotionError {
    EgoMotionError {
        translation_m: (estimate.translation - truth.translation).norm(),
        rotation_deg: (truth.rotation.inverse() * estimate.rotation)
            .angle()
            .to_degrees(),
    }
}

/// Spread of a cloud along a direction: max minus min of the projections.
/// Returns 0 for an empty cloud. The direction need not be unit length.
pub fn smear_extent(points: &[Vec3], direction: Vec3) -> Result<f64, MetricsError> {
    let dir = direction
        .normalized()
        .ok_or(GeomError::InvalidRotation("smear direction with near-zero norm"))?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        let s = p.dot(dir);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if points.is_empty() {
        Ok(0.0)
    } else {
        Ok(hi - lo)
    }
}
