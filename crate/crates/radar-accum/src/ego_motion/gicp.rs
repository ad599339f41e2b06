//! Plane-to-plane GICP registration between consecutive point clouds.
//!
//! Each point carries a local surface covariance built from its k nearest
//! neighbors with eigenvalues flattened to (1, 1, eps): distances along the
//! local surface normal dominate the cost, so flat regions can slide along
//! themselves. The solver alternates nearest-neighbor association with damped
//! Gauss-Newton steps on the pose.

use super::{Diagnostics, EgoMethod, EgoMotionEstimate, EstimateError};
use crate::geom::linalg::{inv3, jacobi_eigen, solve6_spd};
use crate::io::{PointCloudFrame, PointLike};
use crate::{RigidTransform, SpatialIndex, UnitQuaternion, Vec3};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct GicpConfig {
    pub neighbors_for_covariance: usize,
    /// Eigenvalue floor along the surface normal, relative to the in-plane 1.
    pub covariance_regularization: f64,
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    pub translation_tolerance: f64,
    pub rotation_tolerance: f64,
    /// Cell size for centroid downsampling; 0 keeps every point.
    pub voxel_downsample_size: f64,
}

impl Default for GicpConfig {
    /// Defaults tuned for lidar-density clouds.
    fn default() -> Self {
        GicpConfig {
            neighbors_for_covariance: 20,
            covariance_regularization: 1e-3,
            max_correspondence_distance: 1.0,
            max_iterations: 50,
            translation_tolerance: 1e-4,
            rotation_tolerance: 1e-4,
            voxel_downsample_size: 0.1,
        }
    }
}

impl GicpConfig {
    /// Radar clouds are too sparse to downsample.
    pub fn for_radar() -> Self {
        GicpConfig { voxel_downsample_size: 0.0, ..GicpConfig::default() }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        let bad = |msg: &str| Err(EstimateError::BadConfig(msg.into()));
        if self.neighbors_for_covariance < 3 {
            return bad("neighbors_for_covariance must be at least 3");
        }
        if !(self.covariance_regularization > 0.0) {
            return bad("covariance_regularization must be positive");
        }
        if !(self.max_correspondence_distance > 0.0) {
            return bad("max_correspondence_distance must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.translation_tolerance > 0.0) || !(self.rotation_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.voxel_downsample_size < 0.0 {
            return bad("voxel_downsample_size must be non-negative");
        }
        Ok(())
    }
}

/// Full registration result; [`em_gicp`] condenses this into an estimate.
#[derive(Clone, Debug)]
pub struct GicpOutcome {
    /// Maps source coordinates into target coordinates.
    pub transform: RigidTransform,
    pub iterations: u32,
    /// Correspondence count of the last association.
    pub correspondences: usize,
    /// Euclidean RMS distance over the final correspondences.
    pub rms_distance: f64,
    /// Mean Mahalanobis cost recorded at each association; non-increasing.
    pub cost_history: Vec<f64>,
}

type Mat3 = [[f64; 3]; 3];

fn skew(y: Vec3) -> Mat3 {
    [[0.0, -y.z, y.y], [y.z, 0.0, -y.x], [-y.y, y.x, 0.0]]
}

fn mat3_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// R C R^T: re-expresses a covariance after rotating its frame.
fn rotate_cov(r: &Mat3, c: &Mat3) -> Mat3 {
    let mut rc = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rc[i][j] = (0..3).map(|k| r[i][k] * c[k][j]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| rc[i][k] * r[j][k]).sum();
        }
    }
    out
}

/// Centroid downsampling over a regular grid; deterministic output order
/// (lexicographic cell index).
pub(crate) fn voxel_downsample(points: &[Vec3], size: f64) -> Vec<Vec3> {
    if size <= 0.0 {
        return points.to_vec();
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for &p in points {
        let key = (
            (p.x / size).floor() as i64,
            (p.y / size).floor() as i64,
            (p.z / size).floor() as i64,
        );
        let cell = cells.entry(key).or_insert((Vec3::zero(), 0));
        cell.0 += p;
        cell.1 += 1;
    }
    cells.values().map(|&(sum, n)| sum / n as f64).collect()
}

/// Per-point surface covariances: sample covariance of the k nearest
/// neighbors with eigenvalues replaced by (1, 1, eps), largest first.
fn surface_covariances(points: &[Vec3], index: &SpatialIndex, k: usize, eps: f64) -> Vec<Mat3> {
    points
        .iter()
        .map(|&p| {
            let nbrs = index.k_nearest(p, k);
            let n = nbrs.len() as f64;
            let mut mean = Vec3::zero();
            for &(j, _) in &nbrs {
                mean += index.point(j);
            }
            mean = mean / n;
            let mut cov = [[0.0; 3]; 3];
            for &(j, _) in &nbrs {
                let d = index.point(j) - mean;
                let d = [d.x, d.y, d.z];
                for r in 0..3 {
                    for s in 0..3 {
                        cov[r][s] += d[r] * d[s] / n;
                    }
                }
            }
            let (_, vecs) = jacobi_eigen(cov);
            let replaced = [1.0, 1.0, eps];
            let mut out = [[0.0; 3]; 3];
            for (lambda, v) in replaced.iter().zip(&vecs) {
                for r in 0..3 {
                    for s in 0..3 {
                        out[r][s] += lambda * v[r] * v[s];
                    }
                }
            }
            out
        })
        .collect()
}

struct Association {
    /// (source index, target index) pairs within the distance gate.
    pairs: Vec<(usize, usize)>,
    /// Combined information matrix per pair: (C_tgt + R C_src R^T)^-1.
    infos: Vec<Mat3>,
}

fn associate(
    src: &[Vec3],
    src_cov: &[Mat3],
    dst_index: &SpatialIndex,
    dst_cov: &[Mat3],
    t: &RigidTransform,
    max_dist: f64,
) -> Result<Association, EstimateError> {
    let r = t.rotation.to_rotation_matrix();
    let mut pairs = Vec::new();
    let mut infos = Vec::new();
    for (i, &p) in src.iter().enumerate() {
        let y = t.apply(p);
        let (j, dist) = dst_index.nearest(y).expect("target cloud is non-empty");
        if dist > max_dist {
            continue;
        }
        let rotated = rotate_cov(&r, &src_cov[i]);
        let mut combined = dst_cov[j];
        for a in 0..3 {
            for b in 0..3 {
                combined[a][b] += rotated[a][b];
            }
        }
        // Eigenvalues of the sum lie in [2 eps, 2]; always invertible.
        let info = inv3(combined).expect("regularized covariance sum is invertible");
        pairs.push((i, j));
        infos.push(info);
    }
    if pairs.is_empty() {
        return Err(EstimateError::RegistrationDiverged { max_distance: max_dist });
    }
    Ok(Association { pairs, infos })
}

/// Mean Mahalanobis cost of an association under a candidate transform.
fn association_cost(src: &[Vec3], dst: &[Vec3], assoc: &Association, t: &RigidTransform) -> f64 {
    let mut total = 0.0;
    for (&(i, j), info) in assoc.pairs.iter().zip(&assoc.infos) {
        let e = dst[j] - t.apply(src[i]);
        total += e.dot(mat3_vec(info, e));
    }
    total / assoc.pairs.len() as f64
}

/// Registers `source` onto `target`: finds the rigid transform such that
/// `transform(source)` matches `target`. Both clouds must be expressed in the
/// same (sensor) coordinate convention.
pub fn gicp_align(
    source: &[Vec3],
    target: &[Vec3],
    init: &RigidTransform,
    cfg: &GicpConfig,
) -> Result<GicpOutcome, EstimateError> {
    cfg.validate()?;
    let src = voxel_downsample(source, cfg.voxel_downsample_size);
    let dst = voxel_downsample(target, cfg.voxel_downsample_size);
    let need = cfg.neighbors_for_covariance;
    if src.len() < need || dst.len() < need {
        return Err(EstimateError::TooFewPoints { got: src.len().min(dst.len()), need });
    }

    let src_index = SpatialIndex::build(src)?;
    let dst_index = SpatialIndex::build(dst)?;
    let (src, dst) = (src_index.points(), dst_index.points());
    let eps = cfg.covariance_regularization;
    let src_cov = surface_covariances(src, &src_index, need, eps);
    let dst_cov = surface_covariances(dst, &dst_index, need, eps);

    let mut t = *init;
    let mut cost_history = Vec::new();
    let mut iterations = 0u32;
    let mut correspondences = 0;

    for _ in 0..cfg.max_iterations {
        let assoc = associate(&src, &src_cov, &dst_index, &dst_cov, &t, cfg.max_correspondence_distance)?;
        let cost = association_cost(&src, &dst, &assoc, &t);
        if let Some(&last) = cost_history.last() {
            // Re-association raised the objective: the previous iterate was
            // already at the method's fixed point, stop without recording.
            if cost > last + 1e-12 {
                break;
            }
        }
        cost_history.push(cost);
        iterations += 1;
        correspondences = assoc.pairs.len();

        // Gauss-Newton normal equations for the left-multiplied increment
        // (rotation omega, translation v): residual e = q - (Exp(omega) y + v)
        // linearizes to e0 + [skew(y) | -I] (omega; v).
        let mut a = [[0.0; 6]; 6];
        let mut b = [0.0; 6];
        for (&(i, j), info) in assoc.pairs.iter().zip(&assoc.infos) {
            let y = t.apply(src[i]);
            let e = dst[j] - y;
            let s = skew(y);
            let cols = [
                Vec3::new(s[0][0], s[1][0], s[2][0]),
                Vec3::new(s[0][1], s[1][1], s[2][1]),
                Vec3::new(s[0][2], s[1][2], s[2][2]),
                Vec3::new(-1.0, 0.0, 0.0),
                Vec3::new(0.0, -1.0, 0.0),
                Vec3::new(0.0, 0.0, -1.0),
            ];
            let weighted: Vec<Vec3> = cols.iter().map(|&c| mat3_vec(info, c)).collect();
            let we = mat3_vec(info, e);
            for r in 0..6 {
                for c in r..6 {
                    a[r][c] += cols[r].dot(weighted[c]);
                }
                b[r] -= cols[r].dot(we);
            }
        }
        for r in 0..6 {
            for c in 0..r {
                a[r][c] = a[c][r];
            }
        }

        let Some(delta) = solve6_spd(a, b) else {
            // Degenerate geometry (e.g. a single plane); keep the best pose
            // found so far rather than inventing an unconstrained update.
            break;
        };
        let omega = Vec3::new(delta[0], delta[1], delta[2]);
        let v = Vec3::new(delta[3], delta[4], delta[5]);

        // Backtracking line search on the true cost over the fixed
        // association; guarantees this iteration does not increase it.
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..8 {
            let step = RigidTransform::new(
                UnitQuaternion::from_scaled_axis(omega * alpha),
                v * alpha,
            );
            let candidate = step.compose(&t);
            if association_cost(&src, &dst, &assoc, &candidate) <= cost {
                accepted = Some((candidate, alpha));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, alpha)) = accepted else {
            break; // No descent direction left: converged.
        };
        t = next;
        if (v * alpha).norm() < cfg.translation_tolerance
            && (omega * alpha).norm() < cfg.rotation_tolerance
        {
            break;
        }
    }

    // Final Euclidean residual for diagnostics, under the final pose.
    let final_assoc =
        associate(&src, &src_cov, &dst_index, &dst_cov, &t, cfg.max_correspondence_distance)?;
    let mut sq = 0.0;
    for &(i, j) in &final_assoc.pairs {
        sq += dst[j].distance(t.apply(src[i])).powi(2);
    }
    let rms_distance = (sq / final_assoc.pairs.len() as f64).sqrt();

    Ok(GicpOutcome { transform: t, iterations, correspondences, rms_distance, cost_history })
}

/// GICP between two sensor frames, lifted to an ego-frame estimate.
///
/// Points are taken in sensor coordinates; `sensor_to_ego` conjugates the
/// sensor-frame alignment into the ego frame. `init` is the ego-frame initial
/// guess (identity when nothing better is known).
pub fn em_gicp<P: PointLike>(
    source: &PointCloudFrame<P>,
    target: &PointCloudFrame<P>,
    init: &RigidTransform,
    cfg: &GicpConfig,
    sensor_to_ego: &RigidTransform,
) -> Result<EgoMotionEstimate, EstimateError> {
    let src: Vec<Vec3> = source.points.iter().map(|p| p.position()).collect();
    let dst: Vec<Vec3> = target.points.iter().map(|p| p.position()).collect();
    let mount_inv = sensor_to_ego.invert();
    let init_sensor = mount_inv.compose(init).compose(sensor_to_ego);
    let out = gicp_align(&src, &dst, &init_sensor, cfg)?;
    Ok(EgoMotionEstimate {
        from_frame: source.frame_id,
        to_frame: target.frame_id,
        transform: sensor_to_ego.compose(&out.transform).compose(&mount_inv),
        method: EgoMethod::Gicp,
        diagnostics: Diagnostics {
            iterations: Some(out.iterations),
            inlier_count: Some(out.correspondences as u32),
            rms_residual: Some(out.rms_distance),
        },
    })
}
