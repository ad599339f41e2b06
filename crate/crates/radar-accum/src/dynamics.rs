//! Static/dynamic segmentation and per-point motion correction.
//!
//! A radar return from stationary structure has radial velocity
//! `v_rr = -u . v_sensor` (`u` the unit line of sight, `v_sensor` the sensor
//! velocity in its own frame), so `v_rr + u . v_sensor` vanishes for static
//! points and measures the object's own radial speed otherwise. Segmentation
//! thresholds that residual; the corrections below then either move points
//! with their tracked box (ground-truth route) or slide them along the line
//! of sight by the compensated radial velocity (measurement-only route).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::io::{points_in_box, IoError, PointCloudFrame, RadarPoint, TrackedBox};
use crate::{RigidTransform, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("frame gap must be positive, got {0} s")]
    NonPositiveDt(f64),
    #[error("segmentation threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("undefined line of sight: point at the sensor origin")]
    UndefinedLineOfSight,
    #[error("track ids differ: {prev} vs {cur}")]
    TrackMismatch { prev: i64, cur: i64 },
    #[error("box margin must be non-negative and finite, got {0}")]
    BadMargin(f64),
}

/// Segmentation verdict for one radar return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motion {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug)]
pub struct MotionLabel {
    pub motion: Motion,
    /// Absolute compensated radial velocity in m/s; what was thresholded.
    pub residual: f64,
}

impl MotionLabel {
    pub fn is_dynamic(&self) -> bool {
        self.motion == Motion::Dynamic
    }
}

/// Instantaneous sensor velocity, in the sensor frame, implied by an ego
/// transform over `dt` seconds.
///
/// `ego` maps from-frame ego coordinates into to-frame ego coordinates, so
/// the ego velocity observed in the destination frame is `-t / dt` and the
/// angular velocity is `-log(R) / dt`. A sensor mounted away from the ego
/// origin picks up the lever-arm term `w x m` on top of that.
pub fn sensor_velocity_from_ego(
    ego: &RigidTransform,
    dt: f64,
    mounting: &RigidTransform,
) -> Result<Vec3, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::NonPositiveDt(dt));
    }
    let v_ego = -ego.translation / dt;
    let omega = -ego.rotation.scaled_axis() / dt;
    let v_sensor_ego = v_ego + omega.cross(mounting.translation);
    Ok(mounting.rotation.inverse().rotate(v_sensor_ego))
}

/// Radial velocity with the sensor's own motion removed: zero for stationary
/// structure, the object's radial speed otherwise. `sensor_velocity` must be
/// in the sensor frame (see [`sensor_velocity_from_ego`]).
pub fn compensated_radial_velocity(
    point: &RadarPoint,
    sensor_velocity: Vec3,
) -> Result<f64, DynamicsError> {
    let u = point
        .position
        .normalized()
        .ok_or(DynamicsError::UndefinedLineOfSight)?;
    Ok(point.v_rr + u.dot(sensor_velocity))
}

/// Labels every return of a radar frame as static or dynamic by thresholding
/// the compensated radial velocity. `ego` is the motion estimate for the
/// frame pair starting at this frame and `dt` that pair's time gap.
///
/// Returns exactly one label per point, in point order. A return at the
/// sensor origin has no line of sight; its raw `v_rr` serves as the residual.
pub fn segment_static_dynamic(
    frame: &PointCloudFrame<RadarPoint>,
    ego: &RigidTransform,
    dt: f64,
    threshold: f64,
    mounting: &RigidTransform,
) -> Result<Vec<MotionLabel>, DynamicsError> {
    if !(threshold > 0.0) {
        return Err(DynamicsError::BadThreshold(threshold));
    }
    let v_sensor = sensor_velocity_from_ego(ego, dt, mounting)?;
    Ok(frame
        .points
        .iter()
        .map(|p| {
            let residual = match compensated_radial_velocity(p, v_sensor) {
                Ok(r) => r.abs(),
                Err(DynamicsError::UndefinedLineOfSight) => p.v_rr.abs(),
                Err(_) => unreachable!("compensation only fails on zero range"),
            };
            let motion = if residual > threshold { Motion::Dynamic } else { Motion::Static };
            MotionLabel { motion, residual }
        })
        .collect())
}

/// Rigid motion of one tracked object between two frames, both boxes
/// expressed in the same coordinate frame.
#[derive(Clone, Copy, Debug)]
pub struct ObjectMotion {
    pub track_id: i64,
    /// Maps a point riding on the object at the earlier frame to its
    /// position at the later frame.
    pub transform: RigidTransform,
}

/// Derives the object motion that rotates by the yaw change about the
/// earlier box center and moves that center onto the later one.
pub fn object_motion_from_labels(
    prev: &TrackedBox,
    cur: &TrackedBox,
) -> Result<ObjectMotion, DynamicsError> {
    if prev.track_id != cur.track_id {
        return Err(DynamicsError::TrackMismatch { prev: prev.track_id, cur: cur.track_id });
    }
    let rotation = crate::UnitQuaternion::from_rotation_z(cur.yaw - prev.yaw);
    let translation = cur.center - rotation.rotate(prev.center);
    Ok(ObjectMotion {
        track_id: prev.track_id,
        transform: RigidTransform::new(rotation, translation),
    })
}

/// Bookkeeping from one ground-truth correction pass.
#[derive(Clone, Debug, Default)]
pub struct CorrectionStats {
    pub corrected_points: usize,
    pub matched_tracks: usize,
    /// Tracks labeled in the earlier frame only; their points stay uncorrected.
    pub unmatched_prev_tracks: Vec<i64>,
    /// Tracks labeled in the later frame only (newly appeared objects).
    pub unmatched_cur_tracks: Vec<i64>,
}

/// Ground-truth dynamic correction: moves points that belonged to a tracked
/// object in the earlier frame along that object's own motion.
///
/// `points` are the earlier frame's points already mapped into the current
/// ego frame by `ego` (the accumulated ego correction for this hop);
/// `labels_prev` are boxes in the earlier ego frame and are mapped through
/// the same transform here. Membership uses the mapped previous box dilated
/// by `margin`; overlaps resolve to the lowest track id, and boxes flagged
/// static are skipped since their label motion is ego motion already removed.
pub fn dyn_gt_correct(
    points: &[Vec3],
    labels_prev: &[TrackedBox],
    labels_cur: &[TrackedBox],
    ego: &RigidTransform,
    margin: f64,
) -> Result<(Vec<Vec3>, CorrectionStats), DynamicsError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(DynamicsError::BadMargin(margin));
    }
    let prev: BTreeMap<i64, TrackedBox> =
        labels_prev.iter().map(|b| (b.track_id, b.transformed(ego))).collect();
    let cur: BTreeMap<i64, &TrackedBox> =
        labels_cur.iter().map(|b| (b.track_id, b)).collect();

    let mut out = points.to_vec();
    let mut claimed = vec![false; points.len()];
    let mut stats = CorrectionStats::default();

    for (track_id, prev_box) in &prev {
        let Some(cur_box) = cur.get(track_id) else {
            stats.unmatched_prev_tracks.push(*track_id);
            continue;
        };
        stats.matched_tracks += 1;
        if prev_box.is_static {
            continue;
        }
        let motion = object_motion_from_labels(prev_box, cur_box)?;
        let dilated = prev_box
            .dilated(margin)
            .expect("margin already validated");
        for idx in points_in_box(points, &dilated) {
            if !claimed[idx] {
                claimed[idx] = true;
                out[idx] = motion.transform.apply(points[idx]);
                stats.corrected_points += 1;
            }
        }
    }
    for track_id in cur.keys() {
        if !prev.contains_key(track_id) {
            stats.unmatched_cur_tracks.push(*track_id);
        }
    }
    Ok((out, stats))
}

/// Measurement-only dynamic correction: slides a point along its line of
/// sight by the distance the compensated radial velocity predicts over
/// `elapsed` seconds. Exact for radially moving objects, a no-op direction
/// error for tangential motion.
pub fn dyn_vrr_correct(
    position: Vec3,
    compensated_vrr: f64,
    elapsed: f64,
) -> Result<Vec3, DynamicsError> {
    let u = position.normalized().ok_or(DynamicsError::UndefinedLineOfSight)?;
    Ok(position + u * (compensated_vrr * elapsed))
}

/// Writes segmentation labels as one byte per point: 0 static, 1 dynamic.
pub fn write_mask_bin(path: &Path, labels: &[MotionLabel]) -> Result<(), IoError> {
    let file_err = |source| IoError::File { path: path.to_path_buf(), source };
    let mut file = std::fs::File::create(path).map_err(file_err)?;
    let bytes: Vec<u8> =
        labels.iter().map(|l| if l.is_dynamic() { 1 } else { 0 }).collect();
    file.write_all(&bytes).map_err(file_err)
}

/// Reads a segmentation mask written by [`write_mask_bin`]; any byte other
/// than 0 or 1 is rejected.
pub fn read_mask_bin(path: &Path) -> Result<Vec<Motion>, IoError> {
    let file_err = |source| IoError::File { path: path.to_path_buf(), source };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(file_err)?
        .read_to_end(&mut bytes)
        .map_err(file_err)?;
    bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(Motion::Static),
            1 => Ok(Motion::Dynamic),
            other => Err(IoError::Malformed {
                path: path.to_path_buf(),
                detail: format!("mask byte {} is neither 0 nor 1", other),
            }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SphericalDirection;
    use crate::io::BoxDimensions;
    use crate::UnitQuaternion;
    use approx::assert_relative_eq;

    fn radar_point(position: Vec3, v_rr: f64) -> RadarPoint {
        RadarPoint { position, rcs: 5.0, v_rr }
    }

    fn frame(points: Vec<RadarPoint>) -> PointCloudFrame<RadarPoint> {
        PointCloudFrame { frame_id: 0, timestamp: 0.0, sensor_pose: None, points }
    }

    fn boxed(track_id: i64, center: Vec3, yaw: f64, is_static: bool) -> TrackedBox {
        TrackedBox {
            track_id,
            class_name: "car".to_string(),
            center,
            dimensions: BoxDimensions { length: 4.0, width: 2.0, height: 1.6 },
            yaw,
            frame_id: 0,
            is_static,
        }
    }

    #[test]
    fn forward_drive_yields_forward_sensor_velocity() {
        // Ego moved +0.5 m in x over 0.1 s; the estimate maps prev into cur,
        // so its translation is -0.5 and the velocity comes out +5 m/s.
        let ego = RigidTransform::from_translation(Vec3::new(-0.5, 0.0, 0.0));
        let mounting = RigidTransform::from_translation(Vec3::new(1.5, 0.0, 0.5));
        let v = sensor_velocity_from_ego(&ego, 0.1, &mounting).unwrap();
        assert_relative_eq!(v.x, 5.0, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sensor_velocity_matches_numeric_differentiation_under_turning() {
        // Circular ego path; exact poses sampled dt apart. The implied sensor
        // velocity should match the world-frame derivative of the mounted
        // sensor's position to first order in dt.
        let speed = 4.167;
        let yaw_rate = 0.2;
        let radius = speed / yaw_rate;
        let pose_at = |t: f64| {
            RigidTransform::new(
                UnitQuaternion::from_rotation_z(yaw_rate * t),
                Vec3::new(
                    radius * (yaw_rate * t).sin(),
                    radius * (1.0 - (yaw_rate * t).cos()),
                    0.0,
                ),
            )
        };
        let mounting = RigidTransform::from_translation(Vec3::new(1.5, 0.0, 0.5));
        let (t1, dt) = (2.0, 0.01);
        let ego = pose_at(t1).invert().compose(&pose_at(t1 - dt));
        let v = sensor_velocity_from_ego(&ego, dt, &mounting).unwrap();

        let h = 1e-6;
        let sensor_world = |t: f64| pose_at(t).compose(&mounting).translation;
        let v_world = (sensor_world(t1 + h) - sensor_world(t1 - h)) / (2.0 * h);
        let v_ref = pose_at(t1).compose(&mounting).rotation.inverse().rotate(v_world);
        // The pair-averaged velocity differs from the instantaneous one by
        // O(speed * yaw_rate * dt).
        assert!((v - v_ref).norm() < 0.01, "got {:?}, want {:?}", v, v_ref);
    }

    #[test]
    fn stationary_scene_is_all_static() {
        let f = frame(vec![
            radar_point(Vec3::new(10.0, 0.0, 0.0), 0.0),
            radar_point(Vec3::new(0.0, 5.0, 1.0), 0.0),
        ]);
        let labels = segment_static_dynamic(
            &f,
            &RigidTransform::identity(),
            0.1,
            0.4,
            &RigidTransform::identity(),
        )
        .unwrap();
        assert_eq!(labels.len(), 2);
        assert!(labels.iter().all(|l| l.motion == Motion::Static && l.residual == 0.0));
    }

    #[test]
    fn moving_ego_separates_static_structure_from_a_mover() {
        // Ego drives 4.167 m/s forward. Static structure ahead closes at
        // v_rr = -u.v_sensor; the mover carries an extra 2 m/s radial speed.
        let v_sensor = Vec3::new(4.167, 0.0, 0.0);
        let static_dirs = [
            Vec3::new(12.0, 0.0, 0.0),
            Vec3::new(8.0, 6.0, 0.5),
            Vec3::new(-3.0, 9.0, 1.0),
        ];
        let mut points: Vec<RadarPoint> = static_dirs
            .iter()
            .map(|&p| {
                let u = p.normalized().unwrap();
                radar_point(p, -u.dot(v_sensor))
            })
            .collect();
        let mover_pos = Vec3::new(20.0, 2.0, 0.0);
        let mover_u = mover_pos.normalized().unwrap();
        points.push(radar_point(mover_pos, -mover_u.dot(v_sensor) + 2.0));

        let ego = RigidTransform::from_translation(-v_sensor * 0.1);
        let labels = segment_static_dynamic(
            &frame(points),
            &ego,
            0.1,
            0.4,
            &RigidTransform::identity(),
        )
        .unwrap();
        assert_eq!(
            labels.iter().map(|l| l.motion).collect::<Vec<_>>(),
            vec![Motion::Static, Motion::Static, Motion::Static, Motion::Dynamic]
        );
        assert_relative_eq!(labels[3].residual, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn every_point_gets_a_label_including_zero_range() {
        let f = frame(vec![
            radar_point(Vec3::new(0.0, 0.0, 0.0), 3.0),
            radar_point(Vec3::new(1.0, 0.0, 0.0), 0.0),
        ]);
        let labels = segment_static_dynamic(
            &f,
            &RigidTransform::identity(),
            0.1,
            0.4,
            &RigidTransform::identity(),
        )
        .unwrap();
        assert_eq!(labels.len(), f.points.len());
        // Zero-range point falls back to |v_rr| as its residual.
        assert_eq!(labels[0].motion, Motion::Dynamic);
        assert_relative_eq!(labels[0].residual, 3.0);
    }

    #[test]
    fn rejects_bad_threshold_and_bad_dt() {
        let f = frame(vec![radar_point(Vec3::new(1.0, 0.0, 0.0), 0.0)]);
        let id = RigidTransform::identity();
        assert!(segment_static_dynamic(&f, &id, 0.1, 0.0, &id).is_err());
        assert!(segment_static_dynamic(&f, &id, 0.0, 0.4, &id).is_err());
        assert!(segment_static_dynamic(&f, &id, -0.1, 0.4, &id).is_err());
    }

    #[test]
    fn object_motion_moves_center_and_heading() {
        let prev = boxed(7, Vec3::new(1.0, 1.0, 0.0), 0.2, false);
        let cur = boxed(7, Vec3::new(3.0, 2.0, 0.1), 0.2 + 30f64.to_radians(), false);
        let motion = object_motion_from_labels(&prev, &cur).unwrap();
        let moved_center = motion.transform.apply(prev.center);
        assert_relative_eq!(moved_center.x, cur.center.x, epsilon = 1e-12);
        assert_relative_eq!(moved_center.y, cur.center.y, epsilon = 1e-12);
        assert_relative_eq!(moved_center.z, cur.center.z, epsilon = 1e-12);
        let heading = motion
            .transform
            .rotation
            .rotate(Vec3::new(prev.yaw.cos(), prev.yaw.sin(), 0.0));
        assert_relative_eq!(heading.y.atan2(heading.x), cur.yaw, epsilon = 1e-12);
    }

    #[test]
    fn object_motion_rejects_track_mismatch() {
        let prev = boxed(1, Vec3::new(0.0, 0.0, 0.0), 0.0, false);
        let cur = boxed(2, Vec3::new(0.0, 0.0, 0.0), 0.0, false);
        assert!(matches!(
            object_motion_from_labels(&prev, &cur),
            Err(DynamicsError::TrackMismatch { prev: 1, cur: 2 })
        ));
    }

    #[test]
    fn gt_correction_moves_box_members_and_leaves_the_rest() {
        // Ego advanced 0.5 m, object advanced 0.8 m in the current frame.
        let ego = RigidTransform::from_translation(Vec3::new(-0.5, 0.0, 0.0));
        let labels_prev = vec![boxed(3, Vec3::new(10.0, 0.0, 0.0), 0.0, false)];
        let labels_cur = vec![boxed(3, Vec3::new(10.3, 0.0, 0.0), 0.0, false)];
        // Points already in the current ego frame: two on the object (near
        // the mapped previous center 9.5), one static far away.
        let points = vec![
            Vec3::new(9.5, 0.3, 0.2),
            Vec3::new(10.2, -0.4, -0.1),
            Vec3::new(30.0, 5.0, 1.0),
        ];
        let (corrected, stats) =
            dyn_gt_correct(&points, &labels_prev, &labels_cur, &ego, 0.2).unwrap();
        assert_eq!(stats.matched_tracks, 1);
        assert_eq!(stats.corrected_points, 2);
        for i in 0..2 {
            let d = corrected[i] - points[i];
            assert_relative_eq!(d.x, 0.8, epsilon = 1e-12);
            assert_relative_eq!(d.y, 0.0, epsilon = 1e-12);
            assert_relative_eq!(d.z, 0.0, epsilon = 1e-12);
        }
        assert_eq!(corrected[2], points[2]);
    }

    #[test]
    fn gt_correction_is_identity_when_boxes_agree() {
        let labels = vec![boxed(1, Vec3::new(5.0, 1.0, 0.3), 0.4, false)];
        let points = vec![Vec3::new(5.2, 1.1, 0.3), Vec3::new(4.9, 0.8, 0.5)];
        let (corrected, stats) = dyn_gt_correct(
            &points,
            &labels,
            &labels,
            &RigidTransform::identity(),
            0.2,
        )
        .unwrap();
        // Identical boxes produce an exactly-identity object motion, so the
        // points come back bit-identical.
        assert_eq!(corrected, points);
        assert_eq!(stats.corrected_points, 2);
    }

    #[test]
    fn gt_correction_skips_static_boxes_and_reports_unmatched_tracks() {
        let labels_prev = vec![
            boxed(1, Vec3::new(5.0, 0.0, 0.0), 0.0, true),
            boxed(2, Vec3::new(15.0, 0.0, 0.0), 0.0, false),
        ];
        let labels_cur = vec![
            boxed(1, Vec3::new(5.1, 0.0, 0.0), 0.0, true),
            boxed(9, Vec3::new(40.0, 0.0, 0.0), 0.0, false),
        ];
        let points = vec![Vec3::new(5.0, 0.0, 0.0)];
        let (corrected, stats) = dyn_gt_correct(
            &points,
            &labels_prev,
            &labels_cur,
            &RigidTransform::identity(),
            0.2,
        )
        .unwrap();
        // Track 1 matched but is static: untouched. Track 2 lost, track 9 new.
        assert_eq!(corrected, points);
        assert_eq!(stats.matched_tracks, 1);
        assert_eq!(stats.corrected_points, 0);
        assert_eq!(stats.unmatched_prev_tracks, vec![2]);
        assert_eq!(stats.unmatched_cur_tracks, vec![9]);
    }

    #[test]
    fn overlapping_boxes_resolve_to_the_lowest_track_id() {
        let labels_prev = vec![
            boxed(8, Vec3::new(10.0, 0.0, 0.0), 0.0, false),
            boxed(2, Vec3::new(10.5, 0.0, 0.0), 0.0, false),
        ];
        // Track 2 translates +1 in y, track 8 translates -1 in y.
        let labels_cur = vec![
            boxed(8, Vec3::new(10.0, -1.0, 0.0), 0.0, false),
            boxed(2, Vec3::new(10.5, 1.0, 0.0), 0.0, false),
        ];
        let points = vec![Vec3::new(10.2, 0.0, 0.0)];
        let (corrected, _) = dyn_gt_correct(
            &points,
            &labels_prev,
            &labels_cur,
            &RigidTransform::identity(),
            0.0,
        )
        .unwrap();
        assert_relative_eq!(corrected[0].y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_correction_slides_along_the_line_of_sight() {
        let corrected =
            dyn_vrr_correct(Vec3::new(10.0, 0.0, 0.0), 2.0, 0.1).unwrap();
        assert_relative_eq!(corrected.x, 10.2, epsilon = 1e-12);
        assert_eq!(corrected.y, 0.0);
        assert_eq!(corrected.z, 0.0);
    }

    #[test]
    fn radial_correction_preserves_bearing() {
        let p = Vec3::new(3.0, -4.0, 1.5);
        let before = SphericalDirection::from_cartesian(p);
        let after_p = dyn_vrr_correct(p, -1.3, 0.25).unwrap();
        let after = SphericalDirection::from_cartesian(after_p);
        assert_relative_eq!(before.azimuth, after.azimuth, epsilon = 1e-12);
        assert_relative_eq!(before.elevation, after.elevation, epsilon = 1e-12);
        assert_relative_eq!(after.range, before.range - 1.3 * 0.25, epsilon = 1e-12);
    }

    #[test]
    fn radial_correction_rejects_zero_range() {
        assert!(matches!(
            dyn_vrr_correct(Vec3::new(0.0, 0.0, 0.0), 1.0, 0.1),
            Err(DynamicsError::UndefinedLineOfSight)
        ));
    }

    #[test]
    fn compensated_vrr_is_zero_for_static_and_signed_for_movers() {
        let v_sensor = Vec3::new(5.0, 0.0, 0.0);
        let u = Vec3::new(1.0, 0.0, 0.0);
        let static_return = radar_point(u * 12.0, -u.dot(v_sensor));
        assert_relative_eq!(
            compensated_radial_velocity(&static_return, v_sensor).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // Receding object adds positive radial speed.
        let receding = radar_point(u * 12.0, -u.dot(v_sensor) + 3.0);
        assert_relative_eq!(
            compensated_radial_velocity(&receding, v_sensor).unwrap(),
            3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mask_round_trips_and_rejects_stray_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.bin");
        let labels = vec![
            MotionLabel { motion: Motion::Static, residual: 0.0 },
            MotionLabel { motion: Motion::Dynamic, residual: 2.0 },
            MotionLabel { motion: Motion::Static, residual: 0.1 },
        ];
        write_mask_bin(&path, &labels).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), vec![0u8, 1, 0]);
        let loaded = read_mask_bin(&path).unwrap();
        assert_eq!(loaded, vec![Motion::Static, Motion::Dynamic, Motion::Static]);

        std::fs::write(&path, [0u8, 7]).unwrap();
        assert!(read_mask_bin(&path).is_err());
    }
}
