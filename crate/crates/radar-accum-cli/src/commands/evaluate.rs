//! `evaluate`: score an estimates CSV against its sequence.
//!
//! Writes one row per successful frame pair and prints a per-method summary
//! shaped like a results table: method, pair counts, mean Chamfer distance,
//! and pose errors when ground truth is requested.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use radar_accum::ego_motion::{read_estimates_csv, EgoMotionEstimate};
use radar_accum::io::{load_sequence, Sequence};
use radar_accum::metrics::{ego_motion_error, scd_of_correction};

use crate::manifest::RunManifest;
use crate::{CliError, Command};

use super::{ensure_dir, float_cell};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Sequence directory.
    #[arg(long)]
    pub seq: PathBuf,
    /// Estimates CSV; may mix several methods.
    #[arg(long)]
    pub estimates: PathBuf,
    /// Also report pose errors against the sequence's ground truth.
    #[arg(long, default_value_t = false)]
    pub gt: bool,
    /// Per-pair output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-method summary CSV; the summary always prints to stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Optional per-pair translation series for external plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

struct PairScore {
    method: &'static str,
    est: EgoMotionEstimate,
    scd: f64,
    pose_err: Option<(f64, f64)>,
}

pub fn run(args: &EvaluateArgs, out_override: Option<&Path>) -> Result<(), CliError> {
    let seq = load_sequence(&args.seq)?;
    let records = read_estimates_csv(&args.estimates)?;

    let mut failed = 0usize;
    let mut estimates: Vec<EgoMotionEstimate> = Vec::new();
    for rec in &records {
        match rec.estimate() {
            Some(est) => estimates.push(*est),
            None => failed += 1,
        }
    }
    if estimates.is_empty() {
        return Err(CliError::Msg(format!(
            "{}: no successful estimates to evaluate",
            args.estimates.display()
        )));
    }

    let scores: Vec<PairScore> = estimates
        .par_iter()
        .map(|est| score_pair(&seq, est, args.gt))
        .collect::<Result<_, _>>()?;

    let out = out_override.unwrap_or(&args.out);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_pairs_csv(out, &scores)?;
    let summary = render_summary(&scores, failed);
    print!("{summary}");
    if let Some(path) = &args.summary {
        std::fs::write(path, &summary).map_err(|e| CliError::file(path, e))?;
    }
    if let Some(path) = &args.plot_data {
        write_plot_data(path, &scores)?;
    }
    RunManifest::new(Command::Evaluate(args.clone())).write_beside(out)?;
    Ok(())
}

fn score_pair(seq: &Sequence, est: &EgoMotionEstimate, want_gt: bool) -> Result<PairScore, CliError> {
    let scd = scd_of_correction(seq, est, None)?;
    let pose_err = if want_gt {
        let truth = seq
            .ground_truth
            .as_ref()
            .and_then(|gt| gt.ego_transform(est.from_frame, est.to_frame))
            .ok_or_else(|| {
                CliError::Msg(format!(
                    "no ground truth for pair {}->{}; run without --gt or simulate the sequence",
                    est.from_frame, est.to_frame
                ))
            })?;
        let err = ego_motion_error(&est.transform, &truth);
        Some((err.translation_m, err.rotation_deg))
    } else {
        None
    };
    Ok(PairScore { method: est.method.tag(), est: *est, scd, pose_err })
}

fn write_pairs_csv(path: &Path, scores: &[PairScore]) -> Result<(), CliError> {
    let mut out = String::from("method,from_id,to_id,scd_m,trans_err_m,rot_err_deg\n");
    for s in scores {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.method,
            s.est.from_frame,
            s.est.to_frame,
            s.scd,
            float_cell(s.pose_err.map(|e| e.0)),
            float_cell(s.pose_err.map(|e| e.1)),
        );
    }
    std::fs::write(path, out).map_err(|e| CliError::file(path, e))
}

/// Failed rows lose their method tag in the CSV, so they are attributed to
/// the single method when the file holds only one and listed separately when
/// methods are mixed.
fn render_summary(scores: &[PairScore], failed: usize) -> String {
    struct Agg {
        pairs: usize,
        scd: f64,
        trans: f64,
        rot: f64,
        with_gt: usize,
    }
    let mut agg: BTreeMap<&'static str, Agg> = BTreeMap::new();
    for s in scores {
        let a = agg
            .entry(s.method)
            .or_insert(Agg { pairs: 0, scd: 0.0, trans: 0.0, rot: 0.0, with_gt: 0 });
        a.pairs += 1;
        a.scd += s.scd;
        if let Some((t, r)) = s.pose_err {
            a.trans += t;
            a.rot += r;
            a.with_gt += 1;
        }
    }
    let mut out = String::from("method,pairs,failed_pairs,mean_scd_m,mean_trans_err_m,mean_rot_err_deg\n");
    let single_method = agg.len() == 1;
    for (method, a) in &agg {
        let mean = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            method,
            a.pairs,
            if single_method { failed } else { 0 },
            a.scd / a.pairs as f64,
            float_cell(mean(a.trans, a.with_gt)),
            float_cell(mean(a.rot, a.with_gt)),
        );
    }
    if !single_method && failed > 0 {
        let _ = writeln!(out, "unattributed,0,{failed},,,");
    }
    out
}

fn write_plot_data(path: &Path, scores: &[PairScore]) -> Result<(), CliError> {
    let mut out = String::from("method,to_id,tx,ty,tz,translation_norm_m\n");
    for s in scores {
        let t = s.est.transform.translation;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.method,
            s.est.to_frame,
            t.x,
            t.y,
            t.z,
            t.norm()
        );
    }
    std::fs::write(path, out).map_err(|e| CliError::file(path, e))
}
