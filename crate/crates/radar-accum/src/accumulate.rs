//! Multi-frame point cloud accumulation.
//!
//! Radar scans are sparse; stacking the last K frames densifies them enough
//! for downstream consumers. Every past point is carried into the newest
//! frame's radar coordinates through the composed per-pair ego estimates
//! (the radar stays rigidly mounted, so the sensor frame and the ego frame
//! differ only by the fixed mounting). Points from moving objects smear
//! under ego correction alone; the two dynamic correction modes remove that
//! smear with tracked boxes or with the measured radial velocities.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::dynamics::{
    compensated_radial_velocity, dyn_gt_correct, dyn_vrr_correct, segment_static_dynamic,
    sensor_velocity_from_ego, DynamicsError,
};
use crate::ego_motion::{EgoMethod, EgoMotionEstimate, EstimateError};
use crate::io::{IoError, PointCloudFrame, RadarPoint, Sequence};
use crate::{RigidTransform, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum AccumulateError {
    #[error("bad accumulation config: {0}")]
    BadConfig(String),
    #[error("frame {0} is not in the sequence")]
    UnknownFrame(u64),
    #[error("frame {frame} has only {available} frame(s) of history, horizon needs {horizon}")]
    NotEnoughHistory { frame: u64, horizon: usize, available: usize },
    #[error("missing ego estimates for frame pairs {0:?}")]
    MissingEstimates(Vec<(u64, u64)>),
    #[error("dynamic correction requires an ego correction method")]
    DynamicNeedsEgo,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// How points from moving objects are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicMethod {
    /// Leave them where ego correction puts them.
    None,
    /// Move points inside a tracked box along the box's own motion.
    GroundTruth,
    /// Slide each dynamic point along its line of sight by the compensated
    /// radial velocity.
    RadialVelocity,
}

impl DynamicMethod {
    pub fn tag(self) -> &'static str {
        match self {
            DynamicMethod::None => "none",
            DynamicMethod::GroundTruth => "gt",
            DynamicMethod::RadialVelocity => "vrr",
        }
    }
}

impl FromStr for DynamicMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(DynamicMethod::None),
            "gt" | "ground-truth" => Ok(DynamicMethod::GroundTruth),
            "vrr" | "radial-velocity" => Ok(DynamicMethod::RadialVelocity),
            other => Err(format!("unknown dynamic method {:?}", other)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AccumulationConfig {
    /// Number of frames stacked, the newest included. Capped at 256 because
    /// ages persist as one byte.
    pub horizon: usize,
    /// Which estimator the supplied per-pair estimates came from; `None`
    /// concatenates raw sensor-frame points without any correction.
    pub ego_method: Option<EgoMethod>,
    pub dynamic_method: DynamicMethod,
    /// Extra margin around tracked boxes when claiming member points.
    pub box_margin: f64,
    /// Compensated radial speed above which a point counts as dynamic.
    pub segmentation_threshold: f64,
}

impl Default for AccumulationConfig {
    fn default() -> Self {
        AccumulationConfig {
            horizon: 5,
            ego_method: None,
            dynamic_method: DynamicMethod::None,
            box_margin: 0.2,
            segmentation_threshold: 0.4,
        }
    }
}

impl AccumulationConfig {
    fn validate(&self) -> Result<(), AccumulateError> {
        if self.horizon == 0 {
            return Err(AccumulateError::BadConfig("horizon must be at least 1".into()));
        }
        if self.horizon > 256 {
            return Err(AccumulateError::BadConfig(format!(
                "horizon {} exceeds the storable age range",
                self.horizon
            )));
        }
        if !(self.box_margin >= 0.0 && self.box_margin.is_finite()) {
            return Err(AccumulateError::BadConfig(format!(
                "box margin must be non-negative, got {}",
                self.box_margin
            )));
        }
        if !(self.segmentation_threshold > 0.0) {
            return Err(AccumulateError::BadConfig(format!(
                "segmentation threshold must be positive, got {}",
                self.segmentation_threshold
            )));
        }
        if self.ego_method.is_none() && self.dynamic_method != DynamicMethod::None {
            return Err(AccumulateError::DynamicNeedsEgo);
        }
        Ok(())
    }
}

/// One accumulated return: the point in the newest frame's radar
/// coordinates plus where it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccumulatedPoint {
    pub point: RadarPoint,
    /// Frames back from the newest frame: 0 for the newest itself.
    pub age: u8,
    pub source_frame: u64,
    /// Index into the source frame's radar array.
    pub source_index: usize,
}

#[derive(Clone, Debug)]
pub struct AccumulatedCloud {
    /// The newest stacked frame; all points are in its radar coordinates.
    pub frame_id: u64,
    /// Chronological: oldest frame first, original point order within a frame.
    pub points: Vec<AccumulatedPoint>,
}

impl AccumulatedCloud {
    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.point.position).collect()
    }

    pub fn of_age(&self, age: u8) -> impl Iterator<Item = &AccumulatedPoint> {
        self.points.iter().filter(move |p| p.age == age)
    }
}

/// Stacks the `cfg.horizon` frames ending at `frame_id` into that frame's
/// radar coordinates.
///
/// `estimates` must hold one estimate per consecutive frame pair in the
/// window whenever an ego method is configured; extra pairs are ignored.
/// The newest frame's own points pass through untouched, so the age-0
/// subset is bit-identical to the raw scan under every configuration.
pub fn accumulate(
    seq: &Sequence,
    frame_id: u64,
    cfg: &AccumulationConfig,
    estimates: &[EgoMotionEstimate],
) -> Result<AccumulatedCloud, AccumulateError> {
    cfg.validate()?;
    let idx = seq
        .frames
        .iter()
        .position(|f| f.frame_id == frame_id)
        .ok_or(AccumulateError::UnknownFrame(frame_id))?;
    if idx + 1 < cfg.horizon {
        return Err(AccumulateError::NotEnoughHistory {
            frame: frame_id,
            horizon: cfg.horizon,
            available: idx + 1,
        });
    }
    let window = &seq.frames[idx + 1 - cfg.horizon..=idx];
    let newest = window.last().expect("window is non-empty");

    // Raw concatenation: no alignment at all, ages still recorded.
    if cfg.ego_method.is_none() {
        let mut points = Vec::new();
        for (pos, frame) in window.iter().enumerate() {
            let age = (window.len() - 1 - pos) as u8;
            for (i, p) in frame.radar.iter().enumerate() {
                points.push(AccumulatedPoint {
                    point: *p,
                    age,
                    source_frame: frame.frame_id,
                    source_index: i,
                });
            }
        }
        return Ok(AccumulatedCloud { frame_id, points });
    }

    // Per-pair steps for the window, then suffix-composed chains into the
    // newest frame.
    let by_pair: BTreeMap<(u64, u64), &EgoMotionEstimate> =
        estimates.iter().map(|e| ((e.from_frame, e.to_frame), e)).collect();
    let mut missing = Vec::new();
    let mut steps = Vec::new();
    for pair in window.windows(2) {
        let key = (pair[0].frame_id, pair[1].frame_id);
        match by_pair.get(&key) {
            Some(e) => steps.push(*e),
            None => missing.push(key),
        }
    }
    if !missing.is_empty() {
        return Err(AccumulateError::MissingEstimates(missing));
    }
    // chains[i] maps window[i] ego coordinates into newest-frame ego
    // coordinates; the last entry is the identity.
    let mut chains = vec![RigidTransform::identity(); window.len()];
    for i in (0..window.len() - 1).rev() {
        chains[i] = chains[i + 1].compose(&steps[i].transform);
    }

    let mounting = seq.radar_mounting()?;
    let mounting_inv = mounting.invert();
    let mut points = Vec::new();
    for (pos, frame) in window.iter().enumerate() {
        let age = (window.len() - 1 - pos) as u8;
        if age == 0 {
            for (i, p) in frame.radar.iter().enumerate() {
                points.push(AccumulatedPoint {
                    point: *p,
                    age,
                    source_frame: frame.frame_id,
                    source_index: i,
                });
            }
            continue;
        }

        // Dynamic handling happens in the source sensor frame (radial
        // route) or in the newest ego frame (box route); either way the
        // chain below maps through ego coordinates.
        let chain = &chains[pos];
        let sensor_positions: Vec<Vec3> = match cfg.dynamic_method {
            DynamicMethod::None | DynamicMethod::GroundTruth => {
                frame.radar.iter().map(|p| p.position).collect()
            }
            DynamicMethod::RadialVelocity => {
                let step = steps[pos];
                let dt = window[pos + 1].timestamp - frame.timestamp;
                let scan = PointCloudFrame {
                    frame_id: frame.frame_id,
                    timestamp: frame.timestamp,
                    sensor_pose: None,
                    points: frame.radar.clone(),
                };
                let labels = segment_static_dynamic(
                    &scan,
                    &step.transform,
                    dt,
                    cfg.segmentation_threshold,
                    &mounting,
                )?;
                let v_sensor = sensor_velocity_from_ego(&step.transform, dt, &mounting)?;
                let elapsed = newest.timestamp - frame.timestamp;
                frame
                    .radar
                    .iter()
                    .zip(&labels)
                    .map(|(p, label)| {
                        // A dynamic return at the sensor origin has no line
                        // of sight to slide along; leave it in place.
                        if label.is_dynamic() && p.position.norm() > 0.0 {
                            let vrr = compensated_radial_velocity(p, v_sensor)
                                .expect("nonzero range");
                            dyn_vrr_correct(p.position, vrr, elapsed)
                                .expect("nonzero range")
                        } else {
                            p.position
                        }
                    })
                    .collect()
            }
        };

        let mut ego_positions: Vec<Vec3> = sensor_positions
            .iter()
            .map(|&p| chain.apply(mounting.apply(p)))
            .collect();
        if cfg.dynamic_method == DynamicMethod::GroundTruth {
            let (corrected, _) = dyn_gt_correct(
                &ego_positions,
                &frame.labels,
                &newest.labels,
                chain,
                cfg.box_margin,
            )?;
            ego_positions = corrected;
        }

        for (i, (p, ego_pos)) in frame.radar.iter().zip(ego_positions).enumerate() {
            points.push(AccumulatedPoint {
                point: RadarPoint {
                    position: mounting_inv.apply(ego_pos),
                    rcs: p.rcs,
                    v_rr: p.v_rr,
                },
                age,
                source_frame: frame.frame_id,
                source_index: i,
            });
        }
    }
    Ok(AccumulatedCloud { frame_id, points })
}

/// Writes an accumulated cloud as `radar.bin` (the sequence record format)
/// plus `age.bin`, one byte per point.
pub fn write_accumulated(dir: &Path, cloud: &AccumulatedCloud) -> Result<(), IoError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| IoError::File { path: dir.to_path_buf(), source })?;
    let points: Vec<RadarPoint> = cloud.points.iter().map(|p| p.point).collect();
    crate::io::codec::write_radar_bin(&dir.join("radar.bin"), &points)?;
    let age_path = dir.join("age.bin");
    let ages: Vec<u8> = cloud.points.iter().map(|p| p.age).collect();
    let mut file = std::fs::File::create(&age_path)
        .map_err(|source| IoError::File { path: age_path.clone(), source })?;
    file.write_all(&ages)
        .map_err(|source| IoError::File { path: age_path.clone(), source })
}

/// Reads back what [`write_accumulated`] stores. Source frame ids and
/// indices are not persisted, so the result is points and ages only.
pub fn read_accumulated(dir: &Path) -> Result<(Vec<RadarPoint>, Vec<u8>), IoError> {
    let points = crate::io::codec::read_radar_bin(&dir.join("radar.bin"))?;
    let age_path = dir.join("age.bin");
    let mut ages = Vec::new();
    std::fs::File::open(&age_path)
        .map_err(|source| IoError::File { path: age_path.clone(), source })?
        .read_to_end(&mut ages)
        .map_err(|source| IoError::File { path: age_path.clone(), source })?;
    if ages.len() != points.len() {
        return Err(IoError::Malformed {
            path: age_path,
            detail: format!("{} ages for {} points", ages.len(), points.len()),
        });
    }
    Ok((points, ages))
}
