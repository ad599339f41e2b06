//! Sequence data model and on-disk format.
//!
//! A sequence is a directory:
//!
//! ```text
//! seq/
//!   meta.json                  radar_to_ego / lidar_to_ego (16 row-major
//!                              floats each) and the frame id list
//!   frames/<id:05d>/
//!     radar.bin                packed little-endian f32 records
//!                              (x, y, z, rcs, v_rr)
//!     lidar.bin                packed little-endian f32 records
//!                              (x, y, z, intensity)
//!     pose.txt                 16 row-major floats, ego-to-world (optional)
//!     labels.txt               one box per line: track_id class cx cy cz
//!                              length width height yaw is_static
//!     time.txt                 timestamp in seconds
//!   gt/                        written by the simulator (optional)
//!     ego_motion.txt           from_id to_id + 16 row-major floats per line
//!     objects.txt              frame_id track_id vx vy vz per line
//! ```
//!
//! Positions are meters in the sensor frame, `rcs` is dBsm with NaN meaning
//! absent, `v_rr` is the relative radial velocity in m/s, positive when the
//! target recedes. Box centers and yaws in `labels.txt` are expressed in the
//! ego frame of their own frame; yaw rotates about +z and lives in (-pi, pi].
//!
//! Write then load preserves every value bit-exactly: binary records stay
//! `f32`, and text floats are printed with the shortest representation that
//! parses back to the identical `f64`. Matrices loaded from disk are kept
//! verbatim (as matrices) so rewriting a loaded sequence is byte-identical.

pub(crate) mod codec;

pub use codec::{load_sequence, write_sequence};

use crate::geom::GeomError;
use crate::{Matrix4, RigidTransform, Vec3};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("no frames in sequence at {0}")]
    NoFrames(PathBuf),
    #[error("frame ids must be unique and increasing: {0}")]
    BadFrameIds(String),
    #[error("timestamps must be strictly increasing: frame {frame_id} has {timestamp}")]
    NonMonotoneTimestamps { frame_id: u64, timestamp: f64 },
    #[error("unknown frame id {0}")]
    UnknownFrame(u64),
    #[error("negative dilation margin {0}")]
    NegativeMargin(f64),
    #[error("box dimensions must be positive, got {0:?}")]
    BadDimensions((f64, f64, f64)),
    #[error("class name must be non-empty without whitespace, got {0:?}")]
    BadClassName(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// One radar detection in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarPoint {
    pub position: Vec3,
    /// Radar cross-section in dBsm; NaN when the sensor did not report one.
    pub rcs: f64,
    /// Relative radial velocity in m/s, positive when receding.
    pub v_rr: f64,
}

/// One lidar return in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarPoint {
    pub position: Vec3,
    pub intensity: f64,
}

/// Anything with a sensor-frame position; lets estimators run on either
/// sensor's points.
pub trait PointLike {
    fn position(&self) -> Vec3;
}

impl PointLike for RadarPoint {
    fn position(&self) -> Vec3 {
        self.position
    }
}

impl PointLike for LidarPoint {
    fn position(&self) -> Vec3 {
        self.position
    }
}

impl PointLike for Vec3 {
    fn position(&self) -> Vec3 {
        *self
    }
}

/// A single sensor scan with its metadata.
#[derive(Clone, Debug)]
pub struct PointCloudFrame<P> {
    pub frame_id: u64,
    /// Seconds; strictly increasing within a sequence.
    pub timestamp: f64,
    /// Sensor-to-world transform, when the sequence has poses.
    pub sensor_pose: Option<RigidTransform>,
    pub points: Vec<P>,
}

/// 3D box dimensions: length along the heading, width across, height up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDimensions {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

/// Tracked object box in the ego frame of one sequence frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedBox {
    pub track_id: i64,
    pub class_name: String,
    pub center: Vec3,
    pub dimensions: BoxDimensions,
    /// Heading about +z in radians, in (-pi, pi].
    pub yaw: f64,
    pub frame_id: u64,
    pub is_static: bool,
}

impl TrackedBox {
    /// Grows every dimension by `margin` on each side (so length, width and
    /// height each grow by `2 * margin`).
    pub fn dilated(&self, margin: f64) -> Result<TrackedBox, IoError> {
        if margin < 0.0 || !margin.is_finite() {
            return Err(IoError::NegativeMargin(margin));
        }
        let mut out = self.clone();
        out.dimensions.length += 2.0 * margin;
        out.dimensions.width += 2.0 * margin;
        out.dimensions.height += 2.0 * margin;
        Ok(out)
    }

    /// Maps the box through a rigid transform: the center moves with it and
    /// the yaw follows the transformed heading direction.
    pub fn transformed(&self, t: &RigidTransform) -> TrackedBox {
        let mut out = self.clone();
        out.center = t.apply(self.center);
        let heading = t.rotation.rotate(Vec3::new(self.yaw.cos(), self.yaw.sin(), 0.0));
        out.yaw = normalize_yaw(heading.y.atan2(heading.x));
        out
    }
}

/// Wraps an angle into (-pi, pi]. Values already inside pass through
/// unchanged (bit-exact), which keeps load/write cycles stable.
pub fn normalize_yaw(mut yaw: f64) -> f64 {
    use std::f64::consts::PI;
    while yaw > PI {
        yaw -= 2.0 * PI;
    }
    while yaw <= -PI {
        yaw += 2.0 * PI;
    }
    yaw
}

/// Indices of the points inside the box, boundaries inclusive.
pub fn points_in_box(points: &[Vec3], tracked: &TrackedBox) -> Vec<usize> {
    let cos = tracked.yaw.cos();
    let sin = tracked.yaw.sin();
    let half = (
        tracked.dimensions.length / 2.0,
        tracked.dimensions.width / 2.0,
        tracked.dimensions.height / 2.0,
    );
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let d = **p - tracked.center;
            // Rotate by -yaw into the box frame.
            let local_x = cos * d.x + sin * d.y;
            let local_y = -sin * d.x + cos * d.y;
            local_x.abs() <= half.0 && local_y.abs() <= half.1 && d.z.abs() <= half.2
        })
        .map(|(i, _)| i)
        .collect()
}

/// One frame of a sequence: both sensors, labels, and an optional ego pose.
#[derive(Clone, Debug)]
pub struct SequenceFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    /// Ego-to-world matrix, verbatim from `pose.txt`.
    pub ego_pose: Option<Matrix4>,
    pub radar: Vec<RadarPoint>,
    pub lidar: Vec<LidarPoint>,
    pub labels: Vec<TrackedBox>,
}

impl SequenceFrame {
    pub fn ego_pose_transform(&self) -> Result<Option<RigidTransform>, IoError> {
        match &self.ego_pose {
            Some(m) => Ok(Some(RigidTransform::from_matrix4(m)?)),
            None => Ok(None),
        }
    }
}

/// Exact per-pair transforms and object velocities, present on
/// simulator-written sequences.
#[derive(Clone, Debug, Default)]
pub struct SequenceGroundTruth {
    /// `(from_id, to_id, transform)` for consecutive pairs; the matrix maps
    /// from-frame ego coordinates into to-frame ego coordinates.
    pub ego_motion: Vec<(u64, u64, Matrix4)>,
    /// World-frame object velocity per `(frame_id, track_id)`.
    pub object_velocities: Vec<(u64, i64, Vec3)>,
}

impl SequenceGroundTruth {
    /// Exact transform between two frames, composing consecutive pairs.
    pub fn ego_transform(&self, from: u64, to: u64) -> Option<RigidTransform> {
        if from == to {
            return Some(RigidTransform::identity());
        }
        let (lo, hi, invert) = if from < to { (from, to, false) } else { (to, from, true) };
        let by_from: BTreeMap<u64, &Matrix4> =
            self.ego_motion.iter().map(|(f, _, m)| (*f, m)).collect();
        let mut t = RigidTransform::identity();
        let mut cur = lo;
        while cur < hi {
            let m = by_from.get(&cur)?;
            let step = RigidTransform::from_matrix4(m).ok()?;
            let next = self.ego_motion.iter().find(|(f, _, _)| *f == cur)?.1;
            t = step.compose(&t);
            cur = next;
        }
        Some(if invert { t.invert() } else { t })
    }

    pub fn object_velocity(&self, frame_id: u64, track_id: i64) -> Option<Vec3> {
        self.object_velocities
            .iter()
            .find(|(f, t, _)| *f == frame_id && *t == track_id)
            .map(|(_, _, v)| *v)
    }
}

/// A full sequence: mounting transforms plus frames ordered by id.
#[derive(Clone, Debug)]
pub struct Sequence {
    /// Radar-to-ego mounting, verbatim matrix.
    pub radar_to_ego: Matrix4,
    /// Lidar-to-ego mounting, verbatim matrix.
    pub lidar_to_ego: Matrix4,
    pub frames: Vec<SequenceFrame>,
    pub ground_truth: Option<SequenceGroundTruth>,
}

impl Sequence {
    pub fn frame(&self, frame_id: u64) -> Result<&SequenceFrame, IoError> {
        self.frames
            .iter()
            .find(|f| f.frame_id == frame_id)
            .ok_or(IoError::UnknownFrame(frame_id))
    }

    pub fn frame_ids(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.frame_id).collect()
    }

    /// Consecutive `(from, to)` id pairs in sequence order.
    pub fn consecutive_pairs(&self) -> Vec<(u64, u64)> {
        self.frames
            .windows(2)
            .map(|w| (w[0].frame_id, w[1].frame_id))
            .collect()
    }

    pub fn radar_mounting(&self) -> Result<RigidTransform, IoError> {
        Ok(RigidTransform::from_matrix4(&self.radar_to_ego)?)
    }

    pub fn lidar_mounting(&self) -> Result<RigidTransform, IoError> {
        Ok(RigidTransform::from_matrix4(&self.lidar_to_ego)?)
    }

    /// Seconds elapsed between two frames.
    pub fn elapsed(&self, from: u64, to: u64) -> Result<f64, IoError> {
        Ok(self.frame(to)?.timestamp - self.frame(from)?.timestamp)
    }

    /// Assembles the radar scan of a frame as a standalone cloud.
    pub fn radar_cloud(&self, frame_id: u64) -> Result<PointCloudFrame<RadarPoint>, IoError> {
        let frame = self.frame(frame_id)?;
        let sensor_pose = match frame.ego_pose_transform()? {
            Some(ego) => Some(ego.compose(&self.radar_mounting()?)),
            None => None,
        };
        Ok(PointCloudFrame {
            frame_id,
            timestamp: frame.timestamp,
            sensor_pose,
            points: frame.radar.clone(),
        })
    }

    /// Assembles the lidar scan of a frame as a standalone cloud.
    pub fn lidar_cloud(&self, frame_id: u64) -> Result<PointCloudFrame<LidarPoint>, IoError> {
        let frame = self.frame(frame_id)?;
        let sensor_pose = match frame.ego_pose_transform()? {
            Some(ego) => Some(ego.compose(&self.lidar_mounting()?)),
            None => None,
        };
        Ok(PointCloudFrame {
            frame_id,
            timestamp: frame.timestamp,
            sensor_pose,
            points: frame.lidar.clone(),
        })
    }

    /// Checks the structural invariants (id ordering, timestamp monotonicity,
    /// label fields). Used by the loader and before writing.
    pub fn validate(&self) -> Result<(), IoError> {
        let mut last_id: Option<u64> = None;
        let mut last_ts: Option<f64> = None;
        for frame in &self.frames {
            if let Some(prev) = last_id {
                if frame.frame_id <= prev {
                    return Err(IoError::BadFrameIds(format!(
                        "{} follows {}",
                        frame.frame_id, prev
                    )));
                }
            }
            if let Some(prev) = last_ts {
                if frame.timestamp <= prev {
                    return Err(IoError::NonMonotoneTimestamps {
                        frame_id: frame.frame_id,
                        timestamp: frame.timestamp,
                    });
                }
            }
            last_id = Some(frame.frame_id);
            last_ts = Some(frame.timestamp);
            for b in &frame.labels {
                let dims = (b.dimensions.length, b.dimensions.width, b.dimensions.height);
                if !(dims.0 > 0.0 && dims.1 > 0.0 && dims.2 > 0.0) {
                    return Err(IoError::BadDimensions(dims));
                }
                if b.class_name.is_empty() || b.class_name.contains(char::is_whitespace) {
                    return Err(IoError::BadClassName(b.class_name.clone()));
                }
            }
        }
        Ok(())
    }
}
