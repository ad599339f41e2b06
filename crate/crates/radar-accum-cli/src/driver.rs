//! Shared estimator driver: turns a sequence plus a method choice into one
//! estimate record per consecutive frame pair. Used by `estimate-ego`
//! directly and by `accumulate` when it computes its own corrections.

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use radar_accum::ego_motion::{
    em_doppler, em_from_pose, em_gicp, em_identity, em_smooth, em_static_objects, DopplerConfig,
    EgoMethod, EstimateRecord, GicpConfig, MotionModel,
};
use radar_accum::io::Sequence;
use radar_accum::RigidTransform;

use crate::CliError;

/// Estimator roster. The `gicp`/`mgicp` spellings carry the sensor they run
/// on; `identity` is the no-correction baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Pose,
    GicpLidar,
    GicpRadar,
    MgicpLidar,
    Doppler,
    StaticObjects,
    Identity,
}

impl MethodArg {
    pub fn ego_method(self) -> EgoMethod {
        match self {
            MethodArg::Pose => EgoMethod::Pose,
            MethodArg::GicpLidar | MethodArg::GicpRadar => EgoMethod::Gicp,
            MethodArg::MgicpLidar => EgoMethod::SmoothedGicp,
            MethodArg::Doppler => EgoMethod::Doppler,
            MethodArg::StaticObjects => EgoMethod::StaticObjects,
            MethodArg::Identity => EgoMethod::Identity,
        }
    }
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionModelArg {
    /// Straight-line motion between frames.
    Translation,
    /// Front-mounted sensor on a single-track vehicle turning about its
    /// rear axle.
    Ackermann,
}

impl MotionModelArg {
    fn model(self) -> MotionModel {
        match self {
            MotionModelArg::Translation => MotionModel::TranslationOnly,
            MotionModelArg::Ackermann => MotionModel::AckermannSingleTrack,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DriverOptions {
    pub method: MethodArg,
    /// Trailing smoothing window for `mgicp-lidar`.
    pub window: usize,
    /// Base RANSAC seed for `doppler`; each pair derives its own stream.
    pub seed: u64,
    pub motion_model: MotionModelArg,
}

/// Decorrelates per-pair RANSAC streams from one base seed (splitmix64).
pub fn pair_seed(base: u64, from_frame: u64) -> u64 {
    let mut z = base ^ from_frame.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One record per consecutive pair, in sequence order. Pair-level problems
/// become failure rows; only sequence-level problems abort.
pub fn estimate_pairs(seq: &Sequence, opts: &DriverOptions) -> Result<Vec<EstimateRecord>, CliError> {
    let pairs = seq.consecutive_pairs();
    if pairs.is_empty() {
        return Err(CliError::Msg("sequence has a single frame; no pairs to estimate".into()));
    }
    let records = match opts.method {
        MethodArg::Pose => pairs.par_iter().map(|&(a, b)| pose_pair(seq, a, b)).collect(),
        MethodArg::Identity => {
            pairs.iter().map(|&(a, b)| EstimateRecord::success(em_identity(a, b))).collect()
        }
        MethodArg::GicpLidar => {
            let mounting = seq.lidar_mounting()?;
            let cfg = GicpConfig::default();
            pairs
                .par_iter()
                .map(|&(a, b)| gicp_pair(seq, a, b, &cfg, &mounting, false))
                .collect()
        }
        MethodArg::GicpRadar => {
            let mounting = seq.radar_mounting()?;
            let cfg = GicpConfig::for_radar();
            pairs
                .par_iter()
                .map(|&(a, b)| gicp_pair(seq, a, b, &cfg, &mounting, true))
                .collect()
        }
        MethodArg::MgicpLidar => {
            let mounting = seq.lidar_mounting()?;
            let cfg = GicpConfig::default();
            let raw: Vec<EstimateRecord> = pairs
                .par_iter()
                .map(|&(a, b)| gicp_pair(seq, a, b, &cfg, &mounting, false))
                .collect();
            smooth_runs(raw, opts.window)?
        }
        MethodArg::Doppler => {
            let mounting = seq.radar_mounting()?;
            pairs
                .par_iter()
                .map(|&(a, b)| doppler_pair(seq, a, b, opts, &mounting))
                .collect()
        }
        MethodArg::StaticObjects => pairs
            .par_iter()
            .map(|&(a, b)| {
                let prev = &seq.frame(a).expect("pair ids come from the sequence").labels;
                let cur = &seq.frame(b).expect("pair ids come from the sequence").labels;
                match em_static_objects(prev, cur) {
                    Ok(est) => EstimateRecord::success(est),
                    Err(e) => EstimateRecord::failure(a, b, e.to_string()),
                }
            })
            .collect(),
    };
    Ok(records)
}

fn pose_pair(seq: &Sequence, from: u64, to: u64) -> EstimateRecord {
    let pose_of = |id: u64| -> Result<RigidTransform, String> {
        match seq.frame(id).expect("pair ids come from the sequence").ego_pose_transform() {
            Ok(Some(p)) => Ok(p),
            Ok(None) => Err(format!("frame {id} has no pose")),
            Err(e) => Err(e.to_string()),
        }
    };
    match (pose_of(from), pose_of(to)) {
        (Ok(prev), Ok(cur)) => EstimateRecord::success(em_from_pose(from, to, &prev, &cur)),
        (Err(msg), _) | (_, Err(msg)) => EstimateRecord::failure(from, to, msg),
    }
}

fn gicp_pair(
    seq: &Sequence,
    from: u64,
    to: u64,
    cfg: &GicpConfig,
    mounting: &RigidTransform,
    radar: bool,
) -> EstimateRecord {
    let init = RigidTransform::identity();
    let outcome = if radar {
        let source = seq.radar_cloud(from).expect("pair ids come from the sequence");
        let target = seq.radar_cloud(to).expect("pair ids come from the sequence");
        em_gicp(&source, &target, &init, cfg, mounting)
    } else {
        let source = seq.lidar_cloud(from).expect("pair ids come from the sequence");
        let target = seq.lidar_cloud(to).expect("pair ids come from the sequence");
        em_gicp(&source, &target, &init, cfg, mounting)
    };
    match outcome {
        Ok(est) => EstimateRecord::success(est),
        Err(e) => EstimateRecord::failure(from, to, e.to_string()),
    }
}

fn doppler_pair(
    seq: &Sequence,
    from: u64,
    to: u64,
    opts: &DriverOptions,
    mounting: &RigidTransform,
) -> EstimateRecord {
    let cloud = seq.radar_cloud(to).expect("pair ids come from the sequence");
    let dt = seq.elapsed(from, to).expect("pair ids come from the sequence");
    let cfg = DopplerConfig {
        seed: pair_seed(opts.seed, from),
        motion_model: opts.motion_model.model(),
        sensor_mounting: *mounting,
        ..Default::default()
    };
    match em_doppler(&cloud, from, dt, &cfg) {
        Ok((est, _inliers)) => EstimateRecord::success(est),
        Err(e) => EstimateRecord::failure(from, to, e.to_string()),
    }
}

/// Smooths maximal runs of consecutive successes, leaving failure rows in
/// place. Windows restart after each failure.
fn smooth_runs(records: Vec<EstimateRecord>, window: usize) -> Result<Vec<EstimateRecord>, CliError> {
    let mut out: Vec<EstimateRecord> = Vec::with_capacity(records.len());
    let mut run: Vec<radar_accum::ego_motion::EgoMotionEstimate> = Vec::new();
    let flush = |run: &mut Vec<_>, out: &mut Vec<EstimateRecord>| -> Result<(), CliError> {
        if !run.is_empty() {
            let smoothed = em_smooth(run, window)?;
            out.extend(smoothed.into_iter().map(EstimateRecord::success));
            run.clear();
        }
        Ok(())
    };
    for rec in records {
        match rec.outcome {
            Ok(est) => run.push(est),
            Err(_) => {
                flush(&mut run, &mut out)?;
                out.push(rec);
            }
        }
    }
    flush(&mut run, &mut out)?;
    Ok(out)
}
