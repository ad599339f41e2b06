//! `accumulate`: stack every frame with a full horizon and write the
//! accumulated clouds with their age channels.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use radar_accum::accumulate::{
    accumulate, write_accumulated, AccumulateError, AccumulationConfig, DynamicMethod,
};
use radar_accum::dynamics::{segment_static_dynamic, write_mask_bin};
use radar_accum::ego_motion::{estimates_to_csv, EgoMotionEstimate};
use radar_accum::io::{load_sequence, Sequence};

use crate::driver::{estimate_pairs, DriverOptions, MethodArg, MotionModelArg};
use crate::manifest::RunManifest;
use crate::{CliError, Command};

use super::ensure_dir;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicArg {
    /// No object correction.
    None,
    /// Move points with their tracked ground-truth boxes.
    Gt,
    /// Slide dynamic points along their line of sight.
    Vrr,
}

impl DynamicArg {
    fn method(self) -> DynamicMethod {
        match self {
            DynamicArg::None => DynamicMethod::None,
            DynamicArg::Gt => DynamicMethod::GroundTruth,
            DynamicArg::Vrr => DynamicMethod::RadialVelocity,
        }
    }
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct AccumulateArgs {
    /// Sequence directory.
    #[arg(long)]
    pub seq: PathBuf,
    /// Horizon: how many frames each output stacks, newest included.
    #[arg(long)]
    pub frames: usize,
    /// Ego-motion estimator; omit to concatenate raw sensor-frame points.
    #[arg(long, value_enum)]
    pub ego: Option<MethodArg>,
    /// Dynamic-object correction.
    #[arg(long, value_enum, default_value_t = DynamicArg::None)]
    pub dynamic: DynamicArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Box dilation for the gt correction, meters.
    #[arg(long, default_value_t = 0.2)]
    pub box_margin: f64,
    /// Compensated radial speed above which a point counts as dynamic, m/s.
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
    /// Smoothing window for mgicp-lidar.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Base RANSAC seed for doppler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion model for doppler.
    #[arg(long, value_enum, default_value_t = MotionModelArg::Translation)]
    pub motion_model: MotionModelArg,
}

pub fn run(args: &AccumulateArgs, out_override: Option<&Path>) -> Result<(), CliError> {
    let seq = load_sequence(&args.seq)?;
    let out = out_override.unwrap_or(&args.out).to_path_buf();
    ensure_dir(&out)?;

    let (estimates, records) = match args.ego {
        None => (Vec::new(), None),
        Some(method) => {
            let opts = DriverOptions {
                method,
                window: args.window,
                seed: args.seed,
                motion_model: args.motion_model,
            };
            let records = estimate_pairs(&seq, &opts)?;
            let ok: Vec<EgoMotionEstimate> =
                records.iter().filter_map(|r| r.estimate().copied()).collect();
            (ok, Some(records))
        }
    };

    let cfg = AccumulationConfig {
        horizon: args.frames,
        ego_method: args.ego.map(MethodArg::ego_method),
        dynamic_method: args.dynamic.method(),
        box_margin: args.box_margin,
        segmentation_threshold: args.threshold,
    };

    let ids = seq.frame_ids();
    let mut written = 0usize;
    let mut skipped: Vec<u64> = Vec::new();
    for (idx, &frame_id) in ids.iter().enumerate() {
        if idx + 1 < args.frames {
            continue;
        }
        let cloud = match accumulate(&seq, frame_id, &cfg, &estimates) {
            Ok(c) => c,
            Err(AccumulateError::MissingEstimates(_)) => {
                skipped.push(frame_id);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let frame_dir = out.join("frames").join(format!("{frame_id:05}"));
        ensure_dir(&frame_dir)?;
        write_accumulated(&frame_dir, &cloud)?;
        if args.dynamic == DynamicArg::Vrr {
            write_newest_mask(&seq, frame_id, idx, &estimates, args, &frame_dir)?;
        }
        written += 1;
    }

    if let Some(records) = &records {
        let csv = estimates_to_csv(records);
        let path = out.join("estimates.csv");
        std::fs::write(&path, csv).map_err(|e| CliError::file(&path, e))?;
    }
    RunManifest::new(Command::Accumulate(args.clone())).write_in_dir(&out)?;

    if !skipped.is_empty() {
        eprintln!(
            "skipped {} frames with failed estimates in their window: {:?}",
            skipped.len(),
            skipped
        );
    }
    println!("accumulated {written} frames into {}", out.display());
    if written == 0 {
        return Err(CliError::Msg(format!(
            "no frame had a full horizon of {} frames with usable estimates",
            args.frames
        )));
    }
    Ok(())
}

/// Writes the newest frame's static/dynamic mask, derived from the same
/// step estimate the radial correction used. Horizon-1 stacks have no step
/// inside the window, so they get no mask.
fn write_newest_mask(
    seq: &Sequence,
    frame_id: u64,
    idx: usize,
    estimates: &[EgoMotionEstimate],
    args: &AccumulateArgs,
    frame_dir: &Path,
) -> Result<(), CliError> {
    if args.frames < 2 || idx == 0 {
        return Ok(());
    }
    let prev_id = seq.frame_ids()[idx - 1];
    let Some(step) = estimates.iter().find(|e| e.from_frame == prev_id && e.to_frame == frame_id)
    else {
        return Ok(());
    };
    let cloud = seq.radar_cloud(frame_id)?;
    let dt = seq.elapsed(prev_id, frame_id)?;
    let labels = segment_static_dynamic(
        &cloud,
        &step.transform,
        dt,
        args.threshold,
        &seq.radar_mounting()?,
    )?;
    write_mask_bin(&frame_dir.join("mask.bin"), &labels)?;
    Ok(())
}
