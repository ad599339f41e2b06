//! Frame-to-frame ego-motion estimation.
//!
//! Every estimator produces an [`EgoMotionEstimate`] whose transform maps
//! points expressed in the from-frame ego coordinates into the to-frame ego
//! coordinates. Five strategies are provided:
//!
//! * [`em_from_pose`]: difference of externally supplied ego poses.
//! * [`em_gicp`]: plane-to-plane GICP registration of consecutive clouds.
//! * [`em_smooth`]: trailing-window smoothing of an estimate series
//!   (mean translation, eigensolver-averaged rotation).
//! * [`em_doppler`]: instantaneous velocity from single-frame radial
//!   velocities via RANSAC + least squares.
//! * [`em_static_objects`]: rigid alignment of tracked static-object centers.

mod csv;
mod doppler;
mod gicp;

pub use csv::{
    estimates_to_csv, read_estimates_csv, write_estimates_csv, EstimateRecord,
    ESTIMATES_CSV_HEADER,
};
pub use doppler::{em_doppler, DopplerConfig, MotionModel};
pub use gicp::{em_gicp, gicp_align, GicpConfig, GicpOutcome};

use crate::geom::{average_quaternions, GeomError};
use crate::io::TrackedBox;
use crate::{RigidTransform, Vec3};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Which strategy produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EgoMethod {
    Pose,
    Gicp,
    SmoothedGicp,
    Doppler,
    StaticObjects,
    Identity,
}

impl EgoMethod {
    pub fn tag(self) -> &'static str {
        match self {
            EgoMethod::Pose => "pose",
            EgoMethod::Gicp => "gicp",
            EgoMethod::SmoothedGicp => "mgicp",
            EgoMethod::Doppler => "doppler",
            EgoMethod::StaticObjects => "static-objects",
            EgoMethod::Identity => "identity",
        }
    }
}

impl fmt::Display for EgoMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EgoMethod {
    type Err = String;

    /// Accepts the bare tags plus the sensor-qualified CLI spellings
    /// (`gicp-lidar`, `gicp-radar`, `mgicp-lidar`).
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pose" => Ok(EgoMethod::Pose),
            "gicp" | "gicp-lidar" | "gicp-radar" => Ok(EgoMethod::Gicp),
            "mgicp" | "mgicp-lidar" => Ok(EgoMethod::SmoothedGicp),
            "doppler" => Ok(EgoMethod::Doppler),
            "static-objects" => Ok(EgoMethod::StaticObjects),
            "identity" => Ok(EgoMethod::Identity),
            other => Err(format!("unknown ego-motion method {other:?}")),
        }
    }
}

/// Solver-dependent quality indicators; fields a method cannot fill stay
/// `None` (e.g. pose differencing has no iteration count).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: Option<u32>,
    pub inlier_count: Option<u32>,
    pub rms_residual: Option<f64>,
}

/// Rigid ego motion between two frames: `transform` maps from-frame ego
/// coordinates into to-frame ego coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoMotionEstimate {
    pub from_frame: u64,
    pub to_frame: u64,
    pub transform: RigidTransform,
    pub method: EgoMethod,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error("{got} usable points, need at least {need}")]
    TooFewPoints { got: usize, need: usize },
    #[error("registration diverged: no correspondences within {max_distance} m")]
    RegistrationDiverged { max_distance: f64 },
    #[error("insufficient static points: consensus {consensus} < minimum {minimum}")]
    InsufficientStaticPoints { consensus: usize, minimum: usize },
    #[error("velocity under-determined: sampled directions never spanned 3 dimensions")]
    VelocityUnderDetermined,
    #[error("insufficient static objects: {detail}")]
    InsufficientStaticObjects { detail: String },
    #[error("estimates are not a consecutive chain: step {index} covers {from}->{to} but the previous step ended at {expected}")]
    BrokenChain { index: usize, from: u64, to: u64, expected: u64 },
    #[error("no estimate departs frame {at} on the way to frame {target}")]
    ChainGap { at: u64, target: u64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Ego motion from two externally supplied ego-to-world poses:
/// `invert(pose_cur) ∘ pose_prev`.
pub fn em_from_pose(
    from_frame: u64,
    to_frame: u64,
    pose_prev: &RigidTransform,
    pose_cur: &RigidTransform,
) -> EgoMotionEstimate {
    EgoMotionEstimate {
        from_frame,
        to_frame,
        transform: pose_cur.invert().compose(pose_prev),
        method: EgoMethod::Pose,
        diagnostics: Diagnostics::default(),
    }
}

/// The do-nothing estimate, useful as an uncorrected baseline.
pub fn em_identity(from_frame: u64, to_frame: u64) -> EgoMotionEstimate {
    EgoMotionEstimate {
        from_frame,
        to_frame,
        transform: RigidTransform::identity(),
        method: EgoMethod::Identity,
        diagnostics: Diagnostics::default(),
    }
}

/// Smooths a consecutive estimate series with a trailing window: element i
/// becomes the mean translation and averaged rotation of the up-to-`window`
/// estimates ending at i. Windows near the start shrink to the available
/// prefix, so element 0 is always unchanged.
pub fn em_smooth(
    estimates: &[EgoMotionEstimate],
    window: usize,
) -> Result<Vec<EgoMotionEstimate>, EstimateError> {
    if window == 0 {
        return Err(EstimateError::BadConfig("smoothing window must be at least 1".into()));
    }
    for (i, pair) in estimates.windows(2).enumerate() {
        if pair[1].from_frame != pair[0].to_frame {
            return Err(EstimateError::BrokenChain {
                index: i + 1,
                from: pair[1].from_frame,
                to: pair[1].to_frame,
                expected: pair[0].to_frame,
            });
        }
    }

    let mut out = Vec::with_capacity(estimates.len());
    for (i, est) in estimates.iter().enumerate() {
        let lo = (i + 1).saturating_sub(window);
        let span = &estimates[lo..=i];
        let mut translation = Vec3::new(0.0, 0.0, 0.0);
        for e in span {
            translation += e.transform.translation;
        }
        translation = translation / span.len() as f64;
        let rotations: Vec<_> = span.iter().map(|e| e.transform.rotation).collect();
        let rotation = average_quaternions(&rotations, None)?;
        out.push(EgoMotionEstimate {
            from_frame: est.from_frame,
            to_frame: est.to_frame,
            transform: RigidTransform::new(rotation, translation),
            method: EgoMethod::SmoothedGicp,
            diagnostics: Diagnostics {
                iterations: None,
                inlier_count: Some(span.len() as u32),
                rms_residual: None,
            },
        });
    }
    Ok(out)
}

/// Ego motion from tracked static objects: rigidly aligns previous-frame box
/// centers onto current-frame centers, matching boxes by track id. Only boxes
/// flagged static on both sides participate.
pub fn em_static_objects(
    boxes_prev: &[TrackedBox],
    boxes_cur: &[TrackedBox],
) -> Result<EgoMotionEstimate, EstimateError> {
    let statics = |boxes: &[TrackedBox]| -> BTreeMap<i64, Vec3> {
        boxes
            .iter()
            .filter(|b| b.is_static)
            .map(|b| (b.track_id, b.center))
            .collect()
    };
    let prev = statics(boxes_prev);
    let cur = statics(boxes_cur);

    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (track_id, &c_prev) in &prev {
        if let Some(&c_cur) = cur.get(track_id) {
            src.push(c_prev);
            dst.push(c_cur);
        }
    }
    if src.len() < 3 {
        return Err(EstimateError::InsufficientStaticObjects {
            detail: format!("{} matched static tracks, need at least 3", src.len()),
        });
    }

    let transform = match crate::geom::align_correspondences(&src, &dst, None) {
        Ok(t) => t,
        Err(GeomError::DegenerateCorrespondences) => {
            return Err(EstimateError::InsufficientStaticObjects {
                detail: format!("{} matched static tracks are nearly collinear", src.len()),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let rms = crate::geom::alignment_rms(&src, &dst, &transform);

    let frame_of = |boxes: &[TrackedBox]| boxes.iter().find(|b| b.is_static).map(|b| b.frame_id);
    Ok(EgoMotionEstimate {
        // Both lists were non-empty or matching would have failed above.
        from_frame: frame_of(boxes_prev).expect("matched static box"),
        to_frame: frame_of(boxes_cur).expect("matched static box"),
        transform,
        method: EgoMethod::StaticObjects,
        diagnostics: Diagnostics {
            iterations: None,
            inlier_count: Some(src.len() as u32),
            rms_residual: Some(rms),
        },
    })
}

/// Composes per-step estimates into the transform mapping `from`-frame
/// coordinates into `to`-frame coordinates. `from == to` yields identity.
/// The estimates may arrive in any order; steps are followed by frame id.
pub fn compose_chain(
    estimates: &[EgoMotionEstimate],
    from: u64,
    to: u64,
) -> Result<RigidTransform, EstimateError> {
    if from == to {
        return Ok(RigidTransform::identity());
    }
    let by_from: BTreeMap<u64, &EgoMotionEstimate> =
        estimates.iter().map(|e| (e.from_frame, e)).collect();
    let mut cursor = from;
    let mut total = RigidTransform::identity();
    while cursor != to {
        let step = by_from
            .get(&cursor)
            .filter(|e| e.to_frame <= to)
            .ok_or(EstimateError::ChainGap { at: cursor, target: to })?;
        total = step.transform.compose(&total);
        cursor = step.to_frame;
    }
    Ok(total)
}
