//! File-level encoding and decoding of the sequence directory layout.

use super::{
    normalize_yaw, BoxDimensions, IoError, LidarPoint, RadarPoint, Sequence, SequenceFrame,
    SequenceGroundTruth, TrackedBox,
};
use crate::geom::{mat4_flatten, mat4_from_flat};
use crate::{Matrix4, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Serialize, Deserialize)]
struct Meta {
    radar_to_ego: Vec<f64>,
    lidar_to_ego: Vec<f64>,
    frame_ids: Vec<u64>,
}

const RADAR_RECORD: usize = 20; // x y z rcs v_rr as f32
const LIDAR_RECORD: usize = 16; // x y z intensity as f32

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.to_path_buf(), source }
}

fn malformed(path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.to_path_buf(), detail: detail.into() }
}

fn frame_dir(root: &Path, frame_id: u64) -> PathBuf {
    root.join("frames").join(format!("{frame_id:05}"))
}

/// Loads a sequence directory. Every structural defect is reported with the
/// offending path; nothing malformed is silently skipped.
pub fn load_sequence(dir: &Path) -> Result<Sequence, IoError> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| file_err(&meta_path, e))?;
    let meta: Meta =
        serde_json::from_str(&meta_text).map_err(|e| malformed(&meta_path, e.to_string()))?;

    let matrix16 = |v: &[f64], name: &str| -> Result<Matrix4, IoError> {
        let arr: [f64; 16] = v
            .try_into()
            .map_err(|_| malformed(&meta_path, format!("{name} must have 16 entries, got {}", v.len())))?;
        Ok(mat4_from_flat(&arr))
    };
    let radar_to_ego = matrix16(&meta.radar_to_ego, "radar_to_ego")?;
    let lidar_to_ego = matrix16(&meta.lidar_to_ego, "lidar_to_ego")?;

    if meta.frame_ids.is_empty() {
        return Err(IoError::NoFrames(dir.to_path_buf()));
    }
    if !meta.frame_ids.windows(2).all(|w| w[0] < w[1]) {
        return Err(IoError::BadFrameIds(format!("{:?}", meta.frame_ids)));
    }

    let mut frames = Vec::with_capacity(meta.frame_ids.len());
    for &frame_id in &meta.frame_ids {
        frames.push(load_frame(&frame_dir(dir, frame_id), frame_id)?);
    }

    let ground_truth = load_ground_truth(dir)?;
    let seq = Sequence { radar_to_ego, lidar_to_ego, frames, ground_truth };
    seq.validate()?;
    Ok(seq)
}

fn load_frame(dir: &Path, frame_id: u64) -> Result<SequenceFrame, IoError> {
    let radar = read_radar_bin(&dir.join("radar.bin"))?;
    let lidar = read_lidar_bin(&dir.join("lidar.bin"))?;

    let time_path = dir.join("time.txt");
    let time_text = fs::read_to_string(&time_path).map_err(|e| file_err(&time_path, e))?;
    let timestamp: f64 = time_text
        .trim()
        .parse()
        .map_err(|_| malformed(&time_path, format!("bad timestamp {:?}", time_text.trim())))?;

    let pose_path = dir.join("pose.txt");
    let ego_pose = if pose_path.exists() {
        let text = fs::read_to_string(&pose_path).map_err(|e| file_err(&pose_path, e))?;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| malformed(&pose_path, format!("bad number {tok:?}")))
            })
            .collect::<Result<_, _>>()?;
        let arr: [f64; 16] = vals
            .as_slice()
            .try_into()
            .map_err(|_| malformed(&pose_path, format!("expected 16 values, got {}", vals.len())))?;
        Some(mat4_from_flat(&arr))
    } else {
        None
    };

    let labels = read_labels(&dir.join("labels.txt"), frame_id)?;

    Ok(SequenceFrame { frame_id, timestamp, ego_pose, radar, lidar, labels })
}

pub(crate) fn read_radar_bin(path: &Path) -> Result<Vec<RadarPoint>, IoError> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    if bytes.len() % RADAR_RECORD != 0 {
        return Err(malformed(
            path,
            format!("size {} is not a multiple of {RADAR_RECORD}-byte records", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(RADAR_RECORD)
        .map(|rec| {
            let f = |i: usize| {
                f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64
            };
            RadarPoint {
                position: Vec3::new(f(0), f(1), f(2)),
                rcs: f(3),
                v_rr: f(4),
            }
        })
        .collect())
}

fn read_lidar_bin(path: &Path) -> Result<Vec<LidarPoint>, IoError> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    if bytes.len() % LIDAR_RECORD != 0 {
        return Err(malformed(
            path,
            format!("size {} is not a multiple of {LIDAR_RECORD}-byte records", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(LIDAR_RECORD)
        .map(|rec| {
            let f = |i: usize| {
                f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64
            };
            LidarPoint { position: Vec3::new(f(0), f(1), f(2)), intensity: f(3) }
        })
        .collect())
}

fn read_labels(path: &Path, frame_id: u64) -> Result<Vec<TrackedBox>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 10 {
            return Err(malformed(
                path,
                format!("line {}: expected 10 fields, got {}", lineno + 1, toks.len()),
            ));
        }
        let bad = |what: &str| malformed(path, format!("line {}: bad {what}", lineno + 1));
        let track_id: i64 = toks[0].parse().map_err(|_| bad("track id"))?;
        let num = |i: usize, what: &'static str| -> Result<f64, IoError> {
            toks[i].parse().map_err(|_| bad(what))
        };
        let is_static = match toks[9] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("is_static flag (expected 0 or 1)")),
        };
        boxes.push(TrackedBox {
            track_id,
            class_name: toks[1].to_string(),
            center: Vec3::new(num(2, "center x")?, num(3, "center y")?, num(4, "center z")?),
            dimensions: BoxDimensions {
                length: num(5, "length")?,
                width: num(6, "width")?,
                height: num(7, "height")?,
            },
            yaw: normalize_yaw(num(8, "yaw")?),
            frame_id,
            is_static,
        });
    }
    Ok(boxes)
}

fn load_ground_truth(dir: &Path) -> Result<Option<SequenceGroundTruth>, IoError> {
    let gt_dir = dir.join("gt");
    let ego_path = gt_dir.join("ego_motion.txt");
    let obj_path = gt_dir.join("objects.txt");
    if !ego_path.exists() && !obj_path.exists() {
        return Ok(None);
    }
    let mut gt = SequenceGroundTruth::default();
    if ego_path.exists() {
        let text = fs::read_to_string(&ego_path).map_err(|e| file_err(&ego_path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 18 {
                return Err(malformed(
                    &ego_path,
                    format!("line {}: expected 18 fields, got {}", lineno + 1, toks.len()),
                ));
            }
            let parse_err =
                |tok: &str| malformed(&ego_path, format!("line {}: bad number {tok:?}", lineno + 1));
            let from: u64 = toks[0].parse().map_err(|_| parse_err(toks[0]))?;
            let to: u64 = toks[1].parse().map_err(|_| parse_err(toks[1]))?;
            let mut vals = [0.0f64; 16];
            for (slot, tok) in vals.iter_mut().zip(&toks[2..]) {
                *slot = tok.parse().map_err(|_| parse_err(tok))?;
            }
            gt.ego_motion.push((from, to, mat4_from_flat(&vals)));
        }
    }
    if obj_path.exists() {
        let text = fs::read_to_string(&obj_path).map_err(|e| file_err(&obj_path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 {
                return Err(malformed(
                    &obj_path,
                    format!("line {}: expected 5 fields, got {}", lineno + 1, toks.len()),
                ));
            }
            let parse_err =
                |tok: &str| malformed(&obj_path, format!("line {}: bad number {tok:?}", lineno + 1));
            let frame: u64 = toks[0].parse().map_err(|_| parse_err(toks[0]))?;
            let track: i64 = toks[1].parse().map_err(|_| parse_err(toks[1]))?;
            let v = Vec3::new(
                toks[2].parse().map_err(|_| parse_err(toks[2]))?,
                toks[3].parse().map_err(|_| parse_err(toks[3]))?,
                toks[4].parse().map_err(|_| parse_err(toks[4]))?,
            );
            gt.object_velocities.push((frame, track, v));
        }
    }
    Ok(Some(gt))
}

/// Writes a sequence directory. Rewriting a loaded sequence reproduces the
/// original bytes: floats are printed in their shortest round-trip form and
/// binary records are written back as the same `f32` values.
pub fn write_sequence(dir: &Path, seq: &Sequence) -> Result<(), IoError> {
    seq.validate()?;
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;

    let meta = Meta {
        radar_to_ego: mat4_flatten(&seq.radar_to_ego).to_vec(),
        lidar_to_ego: mat4_flatten(&seq.lidar_to_ego).to_vec(),
        frame_ids: seq.frame_ids(),
    };
    let meta_path = dir.join("meta.json");
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, meta_json + "\n").map_err(|e| file_err(&meta_path, e))?;

    for frame in &seq.frames {
        let fdir = frame_dir(dir, frame.frame_id);
        fs::create_dir_all(&fdir).map_err(|e| file_err(&fdir, e))?;

        write_radar_bin(&fdir.join("radar.bin"), &frame.radar)?;

        let lidar_path = fdir.join("lidar.bin");
        let mut bytes = Vec::with_capacity(frame.lidar.len() * LIDAR_RECORD);
        for p in &frame.lidar {
            for v in [p.position.x, p.position.y, p.position.z, p.intensity] {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        fs::write(&lidar_path, bytes).map_err(|e| file_err(&lidar_path, e))?;

        let time_path = fdir.join("time.txt");
        fs::write(&time_path, format!("{}\n", frame.timestamp))
            .map_err(|e| file_err(&time_path, e))?;

        if let Some(pose) = &frame.ego_pose {
            let pose_path = fdir.join("pose.txt");
            fs::write(&pose_path, format!("{}\n", join_floats(&mat4_flatten(pose))))
                .map_err(|e| file_err(&pose_path, e))?;
        }

        let labels_path = fdir.join("labels.txt");
        let mut text = String::new();
        for b in &frame.labels {
            writeln!(
                text,
                "{} {} {} {} {} {} {} {} {} {}",
                b.track_id,
                b.class_name,
                b.center.x,
                b.center.y,
                b.center.z,
                b.dimensions.length,
                b.dimensions.width,
                b.dimensions.height,
                b.yaw,
                u8::from(b.is_static),
            )
            .expect("string write");
        }
        fs::write(&labels_path, text).map_err(|e| file_err(&labels_path, e))?;
    }

    if let Some(gt) = &seq.ground_truth {
        let gt_dir = dir.join("gt");
        fs::create_dir_all(&gt_dir).map_err(|e| file_err(&gt_dir, e))?;
        let mut text = String::new();
        for (from, to, m) in &gt.ego_motion {
            writeln!(text, "{from} {to} {}", join_floats(&mat4_flatten(m))).expect("string write");
        }
        let ego_path = gt_dir.join("ego_motion.txt");
        fs::write(&ego_path, text).map_err(|e| file_err(&ego_path, e))?;

        let mut text = String::new();
        for (frame, track, v) in &gt.object_velocities {
            writeln!(text, "{frame} {track} {} {} {}", v.x, v.y, v.z).expect("string write");
        }
        let obj_path = gt_dir.join("objects.txt");
        fs::write(&obj_path, text).map_err(|e| file_err(&obj_path, e))?;
    }

    Ok(())
}

pub(crate) fn write_radar_bin(path: &Path, points: &[RadarPoint]) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(points.len() * RADAR_RECORD);
    for p in points {
        for v in [p.position.x, p.position.y, p.position.z, p.rcs, p.v_rr] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| file_err(path, e))
}

fn join_floats(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{RigidTransform, UnitQuaternion};
    use std::collections::BTreeMap;

    /// An f32-clean value: survives the f64 -> f32 -> f64 trip unchanged.
    fn q(v: f64) -> f64 {
        v as f32 as f64
    }

    fn sample_sequence() -> Sequence {
        let mount_r = RigidTransform::new(
            UnitQuaternion::identity(),
            Vec3::new(1.5, 0.0, 0.5),
        );
        let mount_l =
            RigidTransform::new(UnitQuaternion::identity(), Vec3::new(0.8, 0.0, 1.6));
        let mk_frame = |id: u64, ts: f64, x: f64| SequenceFrame {
            frame_id: id,
            timestamp: ts,
            ego_pose: Some(
                RigidTransform::new(
                    UnitQuaternion::from_rotation_z(0.01 * id as f64),
                    Vec3::new(x, 0.0, 0.0),
                )
                .to_matrix4(),
            ),
            radar: vec![
                RadarPoint { position: Vec3::new(q(10.25), q(-2.5), q(0.875)), rcs: q(4.5), v_rr: q(-4.125) },
                RadarPoint { position: Vec3::new(q(3.75), q(7.0), q(1.25)), rcs: f32::NAN as f64, v_rr: q(0.5) },
            ],
            lidar: vec![
                LidarPoint { position: Vec3::new(q(5.5), q(0.125), q(-0.25)), intensity: q(0.75) },
            ],
            labels: vec![TrackedBox {
                track_id: 7,
                class_name: "cyclist".into(),
                center: Vec3::new(q(12.0), q(-1.5), q(0.85)),
                dimensions: BoxDimensions { length: 1.8, width: 0.6, height: 1.7 },
                yaw: 0.25,
                frame_id: id,
                is_static: false,
            }],
        };
        Sequence {
            radar_to_ego: mount_r.to_matrix4(),
            lidar_to_ego: mount_l.to_matrix4(),
            frames: vec![mk_frame(0, 0.0, 0.0), mk_frame(1, 0.1, 0.4167), mk_frame(2, 0.3, 0.8)],
            ground_truth: Some(SequenceGroundTruth {
                ego_motion: vec![
                    (0, 1, RigidTransform::from_translation(Vec3::new(-0.4167, 0.0, 0.0)).to_matrix4()),
                    (1, 2, RigidTransform::from_translation(Vec3::new(-0.4, 0.0, 0.0)).to_matrix4()),
                ],
                object_velocities: vec![(0, 7, Vec3::new(0.0, 4.0, 0.0)), (1, 7, Vec3::new(0.0, 4.0, 0.0))],
            }),
        }
    }

    fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
            for entry in fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    walk(&path, root, out);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    out.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
        let mut out = BTreeMap::new();
        walk(dir, dir, &mut out);
        out
    }

    #[test]
    fn write_load_write_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let dir1 = tmp.path().join("a");
        let dir2 = tmp.path().join("b");
        let seq = sample_sequence();
        write_sequence(&dir1, &seq).unwrap();
        let loaded = load_sequence(&dir1).unwrap();
        write_sequence(&dir2, &loaded).unwrap();
        assert_eq!(tree_bytes(&dir1), tree_bytes(&dir2));
    }

    #[test]
    fn round_trip_preserves_values_and_nan_rcs() {
        let tmp = tempfile::tempdir().unwrap();
        let seq = sample_sequence();
        write_sequence(tmp.path(), &seq).unwrap();
        let loaded = load_sequence(tmp.path()).unwrap();

        assert_eq!(loaded.frames.len(), 3);
        assert_eq!(loaded.radar_to_ego, seq.radar_to_ego);
        assert_eq!(loaded.lidar_to_ego, seq.lidar_to_ego);
        for (a, b) in loaded.frames.iter().zip(&seq.frames) {
            assert_eq!(a.frame_id, b.frame_id);
            assert_eq!(a.timestamp, b.timestamp);
            assert_eq!(a.ego_pose, b.ego_pose);
            assert_eq!(a.lidar, b.lidar);
            assert_eq!(a.labels, b.labels);
            assert_eq!(a.radar.len(), b.radar.len());
            for (pa, pb) in a.radar.iter().zip(&b.radar) {
                assert_eq!(pa.position, pb.position);
                assert_eq!(pa.v_rr, pb.v_rr);
                assert_eq!(pa.rcs.is_nan(), pb.rcs.is_nan());
                if !pa.rcs.is_nan() {
                    assert_eq!(pa.rcs, pb.rcs);
                }
            }
        }
        let gt = loaded.ground_truth.unwrap();
        assert_eq!(gt.ego_motion.len(), 2);
        assert_eq!(gt.object_velocities.len(), 2);
    }

    #[test]
    fn truncated_radar_bin_is_rejected_with_path() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(tmp.path(), &sample_sequence()).unwrap();
        let victim = tmp.path().join("frames/00001/radar.bin");
        let mut bytes = fs::read(&victim).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&victim, bytes).unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("00001"), "{err}");
        assert!(err.to_string().contains("20-byte"), "{err}");
    }

    #[test]
    fn missing_required_file_is_rejected_with_path() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(tmp.path(), &sample_sequence()).unwrap();
        fs::remove_file(tmp.path().join("frames/00002/time.txt")).unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("time.txt"), "{err}");
    }

    #[test]
    fn non_monotone_timestamps_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(tmp.path(), &sample_sequence()).unwrap();
        fs::write(tmp.path().join("frames/00002/time.txt"), "0.05\n").unwrap();
        assert!(matches!(
            load_sequence(tmp.path()),
            Err(IoError::NonMonotoneTimestamps { frame_id: 2, .. })
        ));
    }

    #[test]
    fn malformed_labels_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(tmp.path(), &sample_sequence()).unwrap();
        fs::write(tmp.path().join("frames/00000/labels.txt"), "7 car 1 2 3\n").unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("expected 10 fields"), "{err}");
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(
            tmp.path().join("meta.json"),
            serde_json::to_string(&Meta {
                radar_to_ego: mat4_flatten(&RigidTransform::identity().to_matrix4()).to_vec(),
                lidar_to_ego: mat4_flatten(&RigidTransform::identity().to_matrix4()).to_vec(),
                frame_ids: vec![],
            })
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(load_sequence(tmp.path()), Err(IoError::NoFrames(_))));
    }

    #[test]
    fn pose_is_optional() {
        let tmp = tempfile::tempdir().unwrap();
        let mut seq = sample_sequence();
        seq.frames[1].ego_pose = None;
        write_sequence(tmp.path(), &seq).unwrap();
        let loaded = load_sequence(tmp.path()).unwrap();
        assert!(loaded.frames[1].ego_pose.is_none());
        assert!(loaded.frames[0].ego_pose.is_some());
    }
}
