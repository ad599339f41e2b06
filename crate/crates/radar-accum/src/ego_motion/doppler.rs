//! Instantaneous ego motion from a single radar frame.
//!
//! Every static point constrains the sensor velocity: with unit line of
//! sight u and the receding-positive sign convention, v_rr = -u . v_sensor.
//! A seeded RANSAC over 3-point samples separates static structure from
//! moving objects, then the sensor velocity is refit on the consensus set by
//! least squares and integrated over the frame gap into a rigid transform.

use super::{Diagnostics, EgoMethod, EgoMotionEstimate, EstimateError};
use crate::geom::linalg::solve3;
use crate::io::{PointCloudFrame, RadarPoint};
use crate::{RigidTransform, UnitQuaternion, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionModel {
    /// Pure translation: rotation fixed to identity.
    TranslationOnly,
    /// Planar single-track model: yaw rate recovered from the lateral
    /// sensor velocity through the mounting lever arm.
    AckermannSingleTrack,
}

#[derive(Clone, Copy, Debug)]
pub struct DopplerConfig {
    pub ransac_iterations: usize,
    /// Residual bound (m/s) for a point to count as static.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
    pub motion_model: MotionModel,
    /// Sensor-to-ego transform; its rotation maps the recovered velocity
    /// into ego axes, its translation is the Ackermann lever arm.
    pub sensor_mounting: RigidTransform,
}

impl Default for DopplerConfig {
    fn default() -> Self {
        DopplerConfig {
            ransac_iterations: 100,
            inlier_threshold: 0.25,
            min_inliers: 10,
            seed: 0,
            motion_model: MotionModel::TranslationOnly,
            sensor_mounting: RigidTransform::identity(),
        }
    }
}

/// Estimates ego motion for the pair (`from_frame` -> `frame.frame_id`) from
/// the radial velocities of `frame` alone. Also returns the per-point static
/// inlier mask (zero-range points are never inliers).
pub fn em_doppler(
    frame: &PointCloudFrame<RadarPoint>,
    from_frame: u64,
    dt: f64,
    cfg: &DopplerConfig,
) -> Result<(EgoMotionEstimate, Vec<bool>), EstimateError> {
    if !(dt > 0.0) {
        return Err(EstimateError::BadConfig(format!("frame gap must be positive, got {dt}")));
    }
    if cfg.min_inliers < 3 {
        return Err(EstimateError::BadConfig("min_inliers must be at least 3".into()));
    }
    if !(cfg.inlier_threshold > 0.0) {
        return Err(EstimateError::BadConfig("inlier_threshold must be positive".into()));
    }

    // (original index, unit line of sight, v_rr) for points with a defined
    // line of sight.
    let mut candidates = Vec::with_capacity(frame.points.len());
    for (i, p) in frame.points.iter().enumerate() {
        if let Some(u) = p.position.normalized() {
            candidates.push((i, u, p.v_rr));
        }
    }
    if candidates.len() < cfg.min_inliers {
        return Err(EstimateError::TooFewPoints {
            got: candidates.len(),
            need: cfg.min_inliers,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, Vec3)> = None;
    for _ in 0..cfg.ransac_iterations {
        let sample = rand::seq::index::sample(&mut rng, candidates.len(), 3);
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for (row, s) in sample.iter().enumerate() {
            let (_, u, v_rr) = candidates[s];
            a[row] = [u.x, u.y, u.z];
            b[row] = -v_rr;
        }
        let Some(v) = solve3(a, b) else { continue };
        let v = Vec3::new(v[0], v[1], v[2]);
        let count = candidates
            .iter()
            .filter(|&&(_, u, v_rr)| (v_rr + u.dot(v)).abs() < cfg.inlier_threshold)
            .count();
        if best.map_or(true, |(best_count, _)| count > best_count) {
            best = Some((count, v));
        }
    }
    let Some((_, v0)) = best else {
        // Every minimal sample was singular: the directions never spanned 3D.
        return Err(EstimateError::VelocityUnderDetermined);
    };

    // Least-squares refit on the consensus set. Rows are accumulated in a
    // canonical order so the result is independent of input permutation.
    let mut rows: Vec<(Vec3, f64)> = candidates
        .iter()
        .filter(|&&(_, u, v_rr)| (v_rr + u.dot(v0)).abs() < cfg.inlier_threshold)
        .map(|&(_, u, v_rr)| (u, v_rr))
        .collect();
    rows.sort_by(|(ua, va), (ub, vb)| {
        ua.x.total_cmp(&ub.x)
            .then(ua.y.total_cmp(&ub.y))
            .then(ua.z.total_cmp(&ub.z))
            .then(va.total_cmp(vb))
    });
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(u, v_rr) in &rows {
        let r = [u.x, u.y, u.z];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
            atb[i] += r[i] * -v_rr;
        }
    }
    let Some(v) = solve3(ata, atb) else {
        return Err(EstimateError::VelocityUnderDetermined);
    };
    let velocity = Vec3::new(v[0], v[1], v[2]);

    let mut mask = vec![false; frame.points.len()];
    let mut consensus = 0usize;
    let mut residual_sq = 0.0;
    for &(i, u, v_rr) in &candidates {
        let residual = v_rr + u.dot(velocity);
        if residual.abs() < cfg.inlier_threshold {
            mask[i] = true;
            consensus += 1;
            residual_sq += residual * residual;
        }
    }
    if consensus < cfg.min_inliers {
        return Err(EstimateError::InsufficientStaticPoints {
            consensus,
            minimum: cfg.min_inliers,
        });
    }

    let transform = transform_from_velocity(velocity, dt, cfg)?;
    let estimate = EgoMotionEstimate {
        from_frame,
        to_frame: frame.frame_id,
        transform,
        method: EgoMethod::Doppler,
        diagnostics: Diagnostics {
            iterations: Some(cfg.ransac_iterations as u32),
            inlier_count: Some(consensus as u32),
            rms_residual: Some((residual_sq / consensus as f64).sqrt()),
        },
    };
    Ok((estimate, mask))
}

/// Integrates the recovered sensor velocity (sensor frame) over `dt` into the
/// from-ego -> to-ego transform.
fn transform_from_velocity(
    velocity: Vec3,
    dt: f64,
    cfg: &DopplerConfig,
) -> Result<RigidTransform, EstimateError> {
    let v_ego = cfg.sensor_mounting.rotation.rotate(velocity);
    match cfg.motion_model {
        MotionModel::TranslationOnly => {
            // The ego advances by v dt, so previous-frame coordinates shift
            // backwards by the same amount.
            Ok(RigidTransform::from_translation(-v_ego * dt))
        }
        MotionModel::AckermannSingleTrack => {
            let arm = cfg.sensor_mounting.translation;
            if arm.x.abs() < 1e-9 {
                return Err(EstimateError::BadConfig(
                    "Ackermann model needs a nonzero forward mounting offset".into(),
                ));
            }
            // Rigid planar motion: v_sensor = v_origin + omega x arm, with
            // v_origin = (vx, 0, 0) for a non-slipping single track.
            let omega = v_ego.y / arm.x;
            let vx = v_ego.x + omega * arm.y;
            let psi = omega * dt;
            let (dx, dy) = if omega.abs() < 1e-9 {
                (vx * dt, 0.0)
            } else {
                (vx / omega * psi.sin(), vx / omega * (1.0 - psi.cos()))
            };
            // Pose of the current frame expressed in the previous frame,
            // inverted to map previous coordinates forward.
            let pose_cur_in_prev = RigidTransform::new(
                UnitQuaternion::from_rotation_z(psi),
                Vec3::new(dx, dy, v_ego.z * dt),
            );
            Ok(pose_cur_in_prev.invert())
        }
    }
}
