//! CSV serialization for per-frame-pair estimate series.
//!
//! One row per frame pair. Failed pairs keep their row so a series stays
//! aligned with the frame sequence: the method column holds `error[...]`
//! and the numeric columns are left empty.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Diagnostics, EgoMethod, EgoMotionEstimate};
use crate::geom::{RigidTransform, UnitQuaternion, Vec3};
use crate::io::IoError;

pub const ESTIMATES_CSV_HEADER: &str = "from_id,to_id,method,tx,ty,tz,qw,qx,qy,qz,inliers,rms";

/// Outcome of one frame pair: either an estimate or the failure message.
#[derive(Clone, Debug)]
pub struct EstimateRecord {
    pub from_frame: u64,
    pub to_frame: u64,
    pub outcome: Result<EgoMotionEstimate, String>,
}

impl EstimateRecord {
    pub fn success(estimate: EgoMotionEstimate) -> Self {
        EstimateRecord {
            from_frame: estimate.from_frame,
            to_frame: estimate.to_frame,
            outcome: Ok(estimate),
        }
    }

    pub fn failure(from_frame: u64, to_frame: u64, message: impl Into<String>) -> Self {
        EstimateRecord { from_frame, to_frame, outcome: Err(message.into()) }
    }

    pub fn estimate(&self) -> Option<&EgoMotionEstimate> {
        self.outcome.as_ref().ok()
    }
}

/// Renders records to CSV text. Floats use the shortest representation that
/// round-trips, so writing and re-reading a series is bit-exact.
pub fn estimates_to_csv(records: &[EstimateRecord]) -> String {
    let mut out = String::new();
    out.push_str(ESTIMATES_CSV_HEADER);
    out.push('\n');
    for rec in records {
        match &rec.outcome {
            Ok(est) => {
                let t = est.transform.translation;
                let (qw, qx, qy, qz) = est.transform.rotation.wxyz();
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    rec.from_frame,
                    rec.to_frame,
                    est.method.tag(),
                    t.x,
                    t.y,
                    t.z,
                    qw,
                    qx,
                    qy,
                    qz
                );
                match est.diagnostics.inlier_count {
                    Some(n) => {
                        let _ = write!(out, ",{}", n);
                    }
                    None => out.push(','),
                }
                match est.diagnostics.rms_residual {
                    Some(r) => {
                        let _ = write!(out, ",{}", r);
                    }
                    None => out.push(','),
                }
            }
            Err(message) => {
                let _ = write!(
                    out,
                    "{},{},error[{}],,,,,,,,,",
                    rec.from_frame,
                    rec.to_frame,
                    sanitize(message)
                );
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_estimates_csv(path: &Path, records: &[EstimateRecord]) -> Result<(), IoError> {
    std::fs::write(path, estimates_to_csv(records))
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn read_estimates_csv(path: &Path) -> Result<Vec<EstimateRecord>, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim_end() == ESTIMATES_CSV_HEADER => {}
        _ => return Err(malformed(path, 1, "missing estimates header")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(malformed(path, line_no, "expected 12 columns"));
        }
        let from_frame = parse_u64(fields[0], path, line_no)?;
        let to_frame = parse_u64(fields[1], path, line_no)?;
        let method_field = fields[2];
        if let Some(message) = method_field
            .strip_prefix("error[")
            .and_then(|rest| rest.strip_suffix(']'))
        {
            records.push(EstimateRecord::failure(from_frame, to_frame, message));
            continue;
        }
        let method = EgoMethod::from_str(method_field)
            .map_err(|_| malformed(path, line_no, "unknown estimation method"))?;
        let mut nums = [0.0f64; 7];
        for (slot, field) in nums.iter_mut().zip(&fields[3..10]) {
            *slot = parse_f64(field, path, line_no)?;
        }
        let rotation = UnitQuaternion::from_components(nums[3], nums[4], nums[5], nums[6])
            .map_err(|_| malformed(path, line_no, "quaternion is not unit norm"))?;
        let inliers = parse_optional(fields[10], path, line_no, parse_u32)?;
        let rms = parse_optional(fields[11], path, line_no, parse_f64)?;
        records.push(EstimateRecord::success(EgoMotionEstimate {
            from_frame,
            to_frame,
            transform: RigidTransform::new(rotation, Vec3::new(nums[0], nums[1], nums[2])),
            method,
            diagnostics: Diagnostics {
                iterations: None,
                inlier_count: inliers,
                rms_residual: rms,
            },
        }));
    }
    Ok(records)
}

/// Error messages may contain the delimiter or newlines; fold them away so a
/// row always stays one line with a fixed column count.
fn sanitize(message: &str) -> String {
    message
        .chars()
        .map(|ch| if ch == ',' || ch == '\n' || ch == '\r' { ';' } else { ch })
        .collect()
}

fn malformed(path: &Path, line: usize, what: &str) -> IoError {
    IoError::Malformed { path: path.to_path_buf(), detail: format!("line {}: {}", line, what) }
}

fn parse_u64(field: &str, path: &Path, line: usize) -> Result<u64, IoError> {
    field.parse().map_err(|_| malformed(path, line, "bad integer field"))
}

fn parse_u32(field: &str, path: &Path, line: usize) -> Result<u32, IoError> {
    field.parse().map_err(|_| malformed(path, line, "bad integer field"))
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64, IoError> {
    let value: f64 =
        field.parse().map_err(|_| malformed(path, line, "bad float field"))?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(malformed(path, line, "non-finite float field"))
    }
}

fn parse_optional<T>(
    field: &str,
    path: &Path,
    line: usize,
    parse: fn(&str, &Path, usize) -> Result<T, IoError>,
) -> Result<Option<T>, IoError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, path, line).map(Some)
    }
}
