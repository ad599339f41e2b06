//! `estimate-ego`: per-pair ego motion for a whole sequence as CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use radar_accum::ego_motion::write_estimates_csv;
use radar_accum::io::load_sequence;

use crate::driver::{estimate_pairs, DriverOptions, MethodArg, MotionModelArg};
use crate::manifest::RunManifest;
use crate::{CliError, Command};

use super::ensure_dir;

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimateEgoArgs {
    /// Sequence directory.
    #[arg(long)]
    pub seq: PathBuf,
    /// Estimator to run on every consecutive frame pair.
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Output estimates CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Trailing smoothing window for mgicp-lidar.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Base RANSAC seed for doppler; pairs derive independent streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion model for doppler.
    #[arg(long, value_enum, default_value_t = MotionModelArg::Translation)]
    pub motion_model: MotionModelArg,
}

pub fn run(args: &EstimateEgoArgs, out_override: Option<&Path>) -> Result<(), CliError> {
    let seq = load_sequence(&args.seq)?;
    let opts = DriverOptions {
        method: args.method,
        window: args.window,
        seed: args.seed,
        motion_model: args.motion_model,
    };
    let records = estimate_pairs(&seq, &opts)?;

    let succeeded = records.iter().filter(|r| r.estimate().is_some()).count();
    let out = out_override.unwrap_or(&args.out);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_estimates_csv(out, &records)?;
    RunManifest::new(Command::EstimateEgo(args.clone())).write_beside(out)?;
    println!(
        "{}: {succeeded}/{} pairs estimated with {}",
        out.display(),
        records.len(),
        args.method
    );
    if succeeded == 0 {
        return Err(CliError::Msg(format!("{} failed on every frame pair", args.method)));
    }
    Ok(())
}
