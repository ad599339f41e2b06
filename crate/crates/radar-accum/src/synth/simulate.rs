//! Scenario generator: exact kinematics, one seeded RNG stream, optional
//! quantization to the on-disk 32-bit precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ObjectSpec, ScenarioConfig};
use crate::io::{
    normalize_yaw, BoxDimensions, LidarPoint, RadarPoint, Sequence, SequenceFrame,
    SequenceGroundTruth, TrackedBox,
};
use crate::{RigidTransform, UnitQuaternion, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("bad scenario config: {0}")]
    BadConfig(String),
}

/// Exact bookkeeping the simulator knows but a real recording would not.
/// All values are full-precision f64, untouched by noise or quantization.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Exact ego-to-world pose per frame.
    pub ego_poses: Vec<(u64, RigidTransform)>,
    /// Exact transform per consecutive frame pair, mapping from-frame ego
    /// coordinates into to-frame ego coordinates.
    pub ego_motion: Vec<(u64, u64, RigidTransform)>,
    /// World-frame state of every object at every frame.
    pub object_states: Vec<ObjectState>,
    pub frames: Vec<FrameTruth>,
}

#[derive(Clone, Copy, Debug)]
pub struct ObjectState {
    pub frame_id: u64,
    pub track_id: i64,
    pub center_world: Vec3,
    pub velocity_world: Vec3,
    pub yaw_world: f64,
}

/// Per-frame truth, parallel to the frame's point arrays.
#[derive(Clone, Debug)]
pub struct FrameTruth {
    pub frame_id: u64,
    pub timestamp: f64,
    /// One entry per kept radar return, in point order.
    pub radar: Vec<PointTruth>,
    /// One flag per kept lidar return: true when it samples non-moving
    /// surface (fixed structure or a static object).
    pub lidar_static: Vec<bool>,
}

/// Where one radar return really came from.
#[derive(Clone, Copy, Debug)]
pub struct PointTruth {
    /// Persistent scatterer id, stable across frames.
    pub scatterer: usize,
    /// Owning object track, or None for fixed structure.
    pub track_id: Option<i64>,
    pub is_static: bool,
    /// Noise-free sensor-frame position.
    pub position_exact: Vec3,
    /// Generating surface point in world coordinates at measurement time.
    pub world_exact: Vec3,
    /// Noise-free radial velocity, positive receding.
    pub vrr_exact: f64,
}

impl GroundTruth {
    pub fn pose(&self, frame_id: u64) -> Option<&RigidTransform> {
        self.ego_poses.iter().find(|(id, _)| *id == frame_id).map(|(_, p)| p)
    }

    /// Exact transform mapping `from`-frame ego coordinates into `to`-frame
    /// ego coordinates.
    pub fn ego_transform(&self, from: u64, to: u64) -> Option<RigidTransform> {
        let a = self.pose(from)?;
        let b = self.pose(to)?;
        Some(b.invert().compose(a))
    }

    pub fn frame(&self, frame_id: u64) -> Option<&FrameTruth> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }
}

/// A sampleable piece of scene surface.
enum Surface {
    /// Parallelogram patch: `origin + s*u + t*v`, s in [0, len_u), t in [0, len_v).
    Rect { origin: Vec3, u: Vec3, v: Vec3, len_u: f64, len_v: f64 },
    /// Vertical cylinder side wall.
    Cylinder { base: Vec3, radius: f64, height: f64 },
}

impl Surface {
    fn area(&self) -> f64 {
        match self {
            Surface::Rect { len_u, len_v, .. } => len_u * len_v,
            Surface::Cylinder { radius, height, .. } => {
                2.0 * std::f64::consts::PI * radius * height
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match self {
            Surface::Rect { origin, u, v, len_u, len_v } => {
                *origin + *u * rng.gen_range(0.0..*len_u) + *v * rng.gen_range(0.0..*len_v)
            }
            Surface::Cylinder { base, radius, height } => {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let z = rng.gen_range(0.0..*height);
                *base + Vec3::new(radius * theta.cos(), radius * theta.sin(), z)
            }
        }
    }
}

/// Fixed structure as surfaces in world coordinates, in a stable order.
fn static_surfaces(cfg: &ScenarioConfig) -> Vec<Surface> {
    let mut surfaces = Vec::new();
    if let Some(g) = &cfg.ground {
        surfaces.push(Surface::Rect {
            origin: Vec3::new(g.x[0], g.y[0], g.z),
            u: Vec3::new(1.0, 0.0, 0.0),
            v: Vec3::new(0.0, 1.0, 0.0),
            len_u: g.x[1] - g.x[0],
            len_v: g.y[1] - g.y[0],
        });
    }
    for w in &cfg.walls {
        let along = Vec3::new(w.end[0] - w.start[0], w.end[1] - w.start[1], 0.0);
        let len = along.norm();
        surfaces.push(Surface::Rect {
            origin: Vec3::new(w.start[0], w.start[1], w.base_z),
            u: along / len,
            v: Vec3::new(0.0, 0.0, 1.0),
            len_u: len,
            len_v: w.height,
        });
    }
    for p in &cfg.poles {
        surfaces.push(Surface::Cylinder {
            base: Vec3::new(p.center[0], p.center[1], p.base_z),
            radius: p.radius,
            height: p.height,
        });
    }
    surfaces
}

/// The six faces of an axis-aligned box centered at the local origin.
fn box_surfaces(dimensions: [f64; 3]) -> Vec<Surface> {
    let [l, w, h] = dimensions;
    let (hl, hw, hh) = (l / 2.0, w / 2.0, h / 2.0);
    let (x, y, z) =
        (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
    vec![
        Surface::Rect { origin: Vec3::new(hl, -hw, -hh), u: y, v: z, len_u: w, len_v: h },
        Surface::Rect { origin: Vec3::new(-hl, -hw, -hh), u: y, v: z, len_u: w, len_v: h },
        Surface::Rect { origin: Vec3::new(-hl, hw, -hh), u: x, v: z, len_u: l, len_v: h },
        Surface::Rect { origin: Vec3::new(-hl, -hw, -hh), u: x, v: z, len_u: l, len_v: h },
        Surface::Rect { origin: Vec3::new(-hl, -hw, hh), u: x, v: y, len_u: l, len_v: w },
        Surface::Rect { origin: Vec3::new(-hl, -hw, -hh), u: x, v: y, len_u: l, len_v: w },
    ]
}

/// One point uniform over the box surface, faces weighted by area.
fn sample_box_point(dimensions: [f64; 3], rng: &mut ChaCha8Rng) -> Vec3 {
    let faces = box_surfaces(dimensions);
    let total: f64 = faces.iter().map(Surface::area).sum();
    let mut pick = rng.gen_range(0.0..total);
    for face in &faces {
        if pick < face.area() {
            return face.sample(rng);
        }
        pick -= face.area();
    }
    faces.last().expect("boxes have faces").sample(rng)
}

fn sample_count(area: f64, density: f64) -> usize {
    (area * density).round() as usize
}

/// Recording times: ticks at the frame rate over `[0, duration]`, minus the
/// dropped ones.
fn recorded_ticks(cfg: &ScenarioConfig) -> Vec<f64> {
    let n = (cfg.duration * cfg.frame_rate + 1e-9).floor() as u64 + 1;
    (0..n)
        .filter(|i| match cfg.drop_every_nth_tick {
            Some(k) => (i + 1) % u64::from(k) != 0,
            None => true,
        })
        .map(|i| i as f64 / cfg.frame_rate)
        .collect()
}

/// Round through the 32-bit storage format.
fn q32(x: f64) -> f64 {
    x as f32 as f64
}

fn q32v(v: Vec3) -> Vec3 {
    Vec3::new(q32(v.x), q32(v.y), q32(v.z))
}

struct Scatterer {
    /// World position for structure; object-local position for objects.
    position: Vec3,
    rcs: f64,
    /// Index into `cfg.objects`, or None for fixed structure.
    object: Option<usize>,
}

fn object_pose_at(spec: &ObjectSpec, t: f64) -> RigidTransform {
    RigidTransform::new(
        UnitQuaternion::from_rotation_z(spec.heading()),
        Vec3::from(spec.initial_center) + Vec3::from(spec.velocity) * t,
    )
}

/// Generates the full sequence plus its exact ground truth.
///
/// Same config, same output, byte for byte: all sampling runs on one
/// `ChaCha8` stream seeded from `cfg.seed`, visited in a fixed order.
pub fn simulate(cfg: &ScenarioConfig) -> Result<(Sequence, GroundTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rcs_dist = Normal::new(5.0, 3.0).expect("fixed rcs distribution");

    // Persistent radar scatterers: structure first, then each object.
    let mut scatterers = Vec::new();
    let surfaces = static_surfaces(cfg);
    let radar_density = cfg.lidar_density * cfg.radar_density_scale;
    for surf in &surfaces {
        for _ in 0..sample_count(surf.area(), radar_density) {
            scatterers.push(Scatterer {
                position: surf.sample(&mut rng),
                rcs: rcs_dist.sample(&mut rng),
                object: None,
            });
        }
    }
    for (oi, obj) in cfg.objects.iter().enumerate() {
        for _ in 0..obj.scatter_count {
            scatterers.push(Scatterer {
                position: sample_box_point(obj.dimensions, &mut rng),
                rcs: rcs_dist.sample(&mut rng),
                object: Some(oi),
            });
        }
    }

    let radar_mount = RigidTransform::from_translation(Vec3::from(cfg.radar_mounting));
    let lidar_mount = RigidTransform::from_translation(Vec3::from(cfg.lidar_mounting));
    let quantize = cfg.noise.quantize_to_storage;
    let pos_noise = (cfg.noise.position_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.noise.position_sigma).expect("validated sigma"));
    let vrr_noise = (cfg.noise.vrr_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.noise.vrr_sigma).expect("validated sigma"));
    let omega = Vec3::new(0.0, 0.0, cfg.ego.yaw_rate());

    let mut frames = Vec::new();
    let mut truth = GroundTruth {
        ego_poses: Vec::new(),
        ego_motion: Vec::new(),
        object_states: Vec::new(),
        frames: Vec::new(),
    };
    let mut disk_gt = SequenceGroundTruth::default();

    for (idx, &t) in recorded_ticks(cfg).iter().enumerate() {
        let frame_id = idx as u64;
        let pose = cfg.ego.pose_at(t);
        let ego_velocity = cfg.ego.velocity_at(t);
        let object_poses: Vec<RigidTransform> =
            cfg.objects.iter().map(|o| object_pose_at(o, t)).collect();

        // Radar: persistent scatterers seen from the moving sensor.
        let sensor_pose = pose.compose(&radar_mount);
        let sensor_inv = sensor_pose.invert();
        let sensor_velocity =
            ego_velocity + omega.cross(pose.rotation.rotate(radar_mount.translation));
        let mut radar = Vec::new();
        let mut radar_truth = Vec::new();
        for (sid, sc) in scatterers.iter().enumerate() {
            let (world, velocity, track_id, is_static) = match sc.object {
                None => (sc.position, Vec3::zero(), None, true),
                Some(oi) => {
                    let obj = &cfg.objects[oi];
                    (
                        object_poses[oi].apply(sc.position),
                        Vec3::from(obj.velocity),
                        Some(obj.track_id),
                        obj.is_static,
                    )
                }
            };
            let exact = sensor_inv.apply(world);
            let range = exact.norm();
            if range > cfg.max_range {
                continue;
            }
            if cfg.noise.dropout > 0.0 && rng.gen::<f64>() < cfg.noise.dropout {
                continue;
            }
            let u = (world - sensor_pose.translation) / range;
            let vrr_exact = u.dot(velocity - sensor_velocity);
            let mut position = exact;
            if let Some(n) = &pos_noise {
                position += Vec3::new(
                    n.sample(&mut rng),
                    n.sample(&mut rng),
                    n.sample(&mut rng),
                );
            }
            let mut vrr = vrr_exact;
            if let Some(n) = &vrr_noise {
                vrr += n.sample(&mut rng);
            }
            let mut rcs = sc.rcs;
            if quantize {
                position = q32v(position);
                vrr = q32(vrr);
                rcs = q32(rcs);
            }
            radar.push(RadarPoint { position, rcs, v_rr: vrr });
            radar_truth.push(PointTruth {
                scatterer: sid,
                track_id,
                is_static,
                position_exact: exact,
                world_exact: world,
                vrr_exact,
            });
        }

        // Lidar: fresh surface samples every frame.
        let lidar_pose = pose.compose(&lidar_mount);
        let lidar_inv = lidar_pose.invert();
        let mut lidar = Vec::new();
        let mut lidar_static = Vec::new();
        let mut push_lidar = |world: Vec3, is_static: bool, rng: &mut ChaCha8Rng| {
            let mut position = lidar_inv.apply(world);
            if position.norm() > cfg.max_range {
                return;
            }
            if cfg.noise.dropout > 0.0 && rng.gen::<f64>() < cfg.noise.dropout {
                return;
            }
            if let Some(n) = &pos_noise {
                position +=
                    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
            }
            let mut intensity = rng.gen::<f64>();
            if quantize {
                position = q32v(position);
                intensity = q32(intensity);
            }
            lidar.push(LidarPoint { position, intensity });
            lidar_static.push(is_static);
        };
        for surf in &surfaces {
            for _ in 0..sample_count(surf.area(), cfg.lidar_density) {
                let world = surf.sample(&mut rng);
                push_lidar(world, true, &mut rng);
            }
        }
        for (oi, obj) in cfg.objects.iter().enumerate() {
            for face in box_surfaces(obj.dimensions) {
                for _ in 0..sample_count(face.area(), cfg.lidar_density) {
                    let world = object_poses[oi].apply(face.sample(&mut rng));
                    push_lidar(world, obj.is_static, &mut rng);
                }
            }
        }
        drop(push_lidar);

        // Labels live in the ego frame of this tick.
        let pose_inv = pose.invert();
        let ego_yaw = cfg.ego.yaw_at(t);
        let labels: Vec<TrackedBox> = cfg
            .objects
            .iter()
            .zip(&object_poses)
            .map(|(obj, op)| TrackedBox {
                track_id: obj.track_id,
                class_name: obj.class_name.clone(),
                center: pose_inv.apply(op.translation),
                dimensions: BoxDimensions {
                    length: obj.dimensions[0],
                    width: obj.dimensions[1],
                    height: obj.dimensions[2],
                },
                yaw: normalize_yaw(obj.heading() - ego_yaw),
                frame_id,
                is_static: obj.is_static,
            })
            .collect();

        for (obj, op) in cfg.objects.iter().zip(&object_poses) {
            truth.object_states.push(ObjectState {
                frame_id,
                track_id: obj.track_id,
                center_world: op.translation,
                velocity_world: Vec3::from(obj.velocity),
                yaw_world: obj.heading(),
            });
            disk_gt.object_velocities.push((frame_id, obj.track_id, Vec3::from(obj.velocity)));
        }
        truth.ego_poses.push((frame_id, pose));
        truth.frames.push(FrameTruth { frame_id, timestamp: t, radar: radar_truth, lidar_static });
        frames.push(SequenceFrame {
            frame_id,
            timestamp: t,
            ego_pose: Some(pose.to_matrix4()),
            radar,
            lidar,
            labels,
        });
    }

    for pair in truth.ego_poses.windows(2) {
        let (from, prev) = pair[0];
        let (to, cur) = pair[1];
        let motion = cur.invert().compose(&prev);
        truth.ego_motion.push((from, to, motion));
        disk_gt.ego_motion.push((from, to, motion.to_matrix4()));
    }

    let sequence = Sequence {
        radar_to_ego: radar_mount.to_matrix4(),
        lidar_to_ego: lidar_mount.to_matrix4(),
        frames,
        ground_truth: Some(disk_gt),
    };
    Ok((sequence, truth))
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_scenario, EgoTrajectory};
    use super::*;

    #[test]
    fn straight_drive_has_the_expected_shape() {
        let cfg = builtin_scenario("straight-15kmh").unwrap();
        let (seq, truth) = simulate(&cfg).unwrap();
        assert_eq!(seq.frames.len(), 101);
        assert_eq!(truth.ego_poses.len(), 101);
        assert_eq!(truth.ego_motion.len(), 100);
        for (i, f) in seq.frames.iter().enumerate() {
            assert_eq!(f.frame_id, i as u64);
            assert!((f.timestamp - i as f64 * 0.1).abs() < 1e-12);
            assert!(f.radar.len() > 100, "frame {} has {} radar points", i, f.radar.len());
            assert!(f.lidar.len() > 500);
            assert!(f.ego_pose.is_some());
            // Truth stays parallel to the point arrays.
            assert_eq!(truth.frames[i].radar.len(), f.radar.len());
            assert_eq!(truth.frames[i].lidar_static.len(), f.lidar.len());
        }
        assert!(seq.ground_truth.is_some());
        seq.validate().unwrap();
    }

    #[test]
    fn same_seed_reproduces_the_sequence_exactly() {
        let cfg = builtin_scenario("cluttered-urban").unwrap();
        let (a, _) = simulate(&cfg).unwrap();
        let (b, _) = simulate(&cfg).unwrap();
        assert_eq!(a.frames.len(), b.frames.len());
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.radar, fb.radar);
            assert_eq!(fa.lidar, fb.lidar);
            assert_eq!(fa.labels, fb.labels);
            assert_eq!(fa.ego_pose, fb.ego_pose);
        }

        let mut reseeded = cfg;
        reseeded.seed ^= 1;
        let (c, _) = simulate(&reseeded).unwrap();
        assert_ne!(a.frames[0].radar, c.frames[0].radar);
    }

    #[test]
    fn radial_velocity_matches_its_defining_formula() {
        for name in ["turn", "cluttered-urban"] {
            let cfg = builtin_scenario(name).unwrap();
            let (seq, truth) = simulate(&cfg).unwrap();
            let mount = seq.radar_mounting().unwrap();
            let omega = Vec3::new(0.0, 0.0, cfg.ego.yaw_rate());
            for ft in &truth.frames {
                let pose = truth.pose(ft.frame_id).unwrap();
                let sensor_pose = pose.compose(&mount);
                let sensor_velocity = cfg.ego.velocity_at(ft.timestamp)
                    + omega.cross(pose.rotation.rotate(mount.translation));
                for pt in &ft.radar {
                    let v_point = match pt.track_id {
                        None => Vec3::zero(),
                        Some(track) => truth
                            .object_states
                            .iter()
                            .find(|s| s.frame_id == ft.frame_id && s.track_id == track)
                            .unwrap()
                            .velocity_world,
                    };
                    let offset = pt.world_exact - sensor_pose.translation;
                    let u = offset / offset.norm();
                    let expected = u.dot(v_point - sensor_velocity);
                    assert!(
                        (expected - pt.vrr_exact).abs() < 1e-12,
                        "{} frame {}: vrr {} vs {}",
                        name,
                        ft.frame_id,
                        pt.vrr_exact,
                        expected
                    );
                    // Sensor-frame and world positions describe the same point.
                    let back = sensor_pose.invert().apply(pt.world_exact);
                    assert!((back - pt.position_exact).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn radial_velocity_matches_numeric_range_rate() {
        let cfg = builtin_scenario("oncoming-car").unwrap();
        let (seq, truth) = simulate(&cfg).unwrap();
        let mount = seq.radar_mounting().unwrap();
        let h = 1e-6;
        for ft in truth.frames.iter().step_by(7) {
            let t = ft.timestamp;
            for pt in ft.radar.iter().step_by(23) {
                let velocity = match pt.track_id {
                    None => Vec3::zero(),
                    Some(track) => truth
                        .object_states
                        .iter()
                        .find(|s| s.frame_id == ft.frame_id && s.track_id == track)
                        .unwrap()
                        .velocity_world,
                };
                // Objects translate without turning, so the scatterer's world
                // path is linear around t.
                let range_at = |dt: f64| {
                    let sensor = cfg.ego.pose_at(t + dt).compose(&mount).translation;
                    (pt.world_exact + velocity * dt - sensor).norm()
                };
                let numeric = (range_at(h) - range_at(-h)) / (2.0 * h);
                assert!(
                    (numeric - pt.vrr_exact).abs() < 1e-5,
                    "range rate {} vs stored {}",
                    numeric,
                    pt.vrr_exact
                );
            }
        }
    }

    #[test]
    fn static_scatterers_chain_exactly_through_ego_motion() {
        let cfg = builtin_scenario("turn").unwrap();
        let (seq, truth) = simulate(&cfg).unwrap();
        let mount = seq.radar_mounting().unwrap();
        let mut checked = 0usize;
        for pair in truth.frames.windows(2) {
            let motion = truth.ego_transform(pair[0].frame_id, pair[1].frame_id).unwrap();
            for prev_pt in pair[0].radar.iter().filter(|p| p.track_id.is_none()) {
                let Some(cur_pt) =
                    pair[1].radar.iter().find(|p| p.scatterer == prev_pt.scatterer)
                else {
                    continue;
                };
                let mapped = motion.apply(mount.apply(prev_pt.position_exact));
                let observed = mount.apply(cur_pt.position_exact);
                assert!(
                    (mapped - observed).norm() < 1e-12,
                    "scatterer {} drifted {}",
                    prev_pt.scatterer,
                    (mapped - observed).norm()
                );
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {} chained observations", checked);
    }

    #[test]
    fn quantized_output_survives_storage_precision() {
        let cfg = builtin_scenario("straight-15kmh").unwrap();
        let (seq, _) = simulate(&cfg).unwrap();
        for f in &seq.frames {
            for p in &f.radar {
                assert_eq!(p.position.x, p.position.x as f32 as f64);
                assert_eq!(p.v_rr, p.v_rr as f32 as f64);
                assert_eq!(p.rcs, p.rcs as f32 as f64);
            }
            for p in &f.lidar {
                assert_eq!(p.position.y, p.position.y as f32 as f64);
                assert_eq!(p.intensity, p.intensity as f32 as f64);
            }
        }
    }

    #[test]
    fn unquantized_noise_free_points_equal_the_exact_geometry() {
        let mut cfg = builtin_scenario("straight-15kmh").unwrap();
        cfg.noise.quantize_to_storage = false;
        let (seq, truth) = simulate(&cfg).unwrap();
        for (f, ft) in seq.frames.iter().zip(&truth.frames) {
            for (p, pt) in f.radar.iter().zip(&ft.radar) {
                assert_eq!(p.position, pt.position_exact);
                assert_eq!(p.v_rr, pt.vrr_exact);
            }
        }
    }

    #[test]
    fn dropped_ticks_leave_timestamp_gaps_with_consecutive_ids() {
        let cfg = builtin_scenario("cluttered-urban").unwrap();
        let (seq, _) = simulate(&cfg).unwrap();
        // 51 ticks minus every 4th leaves 39 recorded frames.
        assert_eq!(seq.frames.len(), 39);
        let ids = seq.frame_ids();
        assert!(ids.windows(2).all(|w| w[1] == w[0] + 1));
        let mut gaps: Vec<f64> = seq
            .frames
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .collect();
        let long = gaps.iter().filter(|&&g| (g - 0.2).abs() < 1e-9).count();
        let short = gaps.iter().filter(|&&g| (g - 0.1).abs() < 1e-9).count();
        assert_eq!(long + short, gaps.len());
        assert!(long >= 11, "expected repeated long gaps, got {}", long);
        gaps.sort_by(f64::total_cmp);
        assert!((gaps[gaps.len() - 1] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn labels_track_objects_in_the_ego_frame() {
        let cfg = builtin_scenario("oncoming-car").unwrap();
        let (seq, _) = simulate(&cfg).unwrap();
        let first = &seq.frames[0].labels;
        assert_eq!(first.len(), 1);
        assert!((first[0].center - Vec3::new(35.0, 0.0, 0.75)).norm() < 1e-12);
        assert!((first[0].yaw.abs() - std::f64::consts::PI).abs() < 1e-12);
        // One second in: ego advanced 4.167 m, car came 5 m closer.
        let f10 = &seq.frames[10].labels[0];
        assert!((f10.center.x - (35.0 - 5.0 - 4.167)).abs() < 1e-9);

        let cluttered = builtin_scenario("cluttered-urban").unwrap();
        let (seq, _) = simulate(&cluttered).unwrap();
        let racks: Vec<_> =
            seq.frames[0].labels.iter().filter(|b| b.is_static).collect();
        assert_eq!(racks.len(), 4);
    }

    #[test]
    fn turning_ego_keeps_heading_aligned_labels() {
        // A static object's ego-frame yaw must counter-rotate as the ego
        // turns, keeping the world heading constant.
        let mut cfg = builtin_scenario("turn").unwrap();
        cfg.objects.push(ObjectSpec {
            track_id: 5,
            class_name: "rack".to_string(),
            dimensions: [1.0, 1.0, 1.0],
            initial_center: [15.0, 5.0, 0.5],
            velocity: [0.0, 0.0, 0.0],
            yaw: Some(0.7),
            scatter_count: 5,
            is_static: true,
        });
        let (seq, truth) = simulate(&cfg).unwrap();
        for f in seq.frames.iter().step_by(10) {
            let label = &f.labels[0];
            let ego_yaw = truth.pose(f.frame_id).unwrap().rotation.scaled_axis().z;
            let world_yaw = normalize_yaw(label.yaw + ego_yaw);
            assert!((world_yaw - 0.7).abs() < 1e-9, "world yaw drifted to {}", world_yaw);
        }
    }

    #[test]
    fn scatterers_persist_across_frames() {
        let cfg = builtin_scenario("straight-15kmh").unwrap();
        let (_, truth) = simulate(&cfg).unwrap();
        let ids = |f: &FrameTruth| -> std::collections::BTreeSet<usize> {
            f.radar.iter().map(|p| p.scatterer).collect()
        };
        let a = ids(&truth.frames[0]);
        let b = ids(&truth.frames[1]);
        let common: Vec<usize> = a.intersection(&b).copied().collect();
        assert!(common.len() > 100);
        // Same static scatterer, same world position, bit for bit.
        for sid in common.iter().take(20) {
            let pa = truth.frames[0].radar.iter().find(|p| p.scatterer == *sid).unwrap();
            let pb = truth.frames[1].radar.iter().find(|p| p.scatterer == *sid).unwrap();
            if pa.track_id.is_none() {
                assert_eq!(pa.world_exact, pb.world_exact);
            }
        }
    }

    #[test]
    fn approaching_static_structure_has_negative_radial_velocity() {
        let cfg = builtin_scenario("straight-15kmh").unwrap();
        let (seq, truth) = simulate(&cfg).unwrap();
        let frame = &seq.frames[0];
        let mut ahead = 0usize;
        for (p, pt) in frame.radar.iter().zip(&truth.frames[0].radar) {
            if pt.is_static && p.position.x > 5.0 && p.position.y.abs() < 2.0 {
                assert!(p.v_rr < 0.0, "point ahead at {:?} has vrr {}", p.position, p.v_rr);
                ahead += 1;
            }
        }
        assert!(ahead > 10);
    }

    #[test]
    fn constant_velocity_ground_truth_motion_is_exact() {
        let cfg = builtin_scenario("straight-15kmh").unwrap();
        let (_, truth) = simulate(&cfg).unwrap();
        for (_, _, motion) in &truth.ego_motion {
            assert!((motion.translation.x - (-0.4167)).abs() < 1e-12);
            assert!(motion.translation.y.abs() < 1e-12);
            assert!(motion.rotation.angle() < 1e-15);
        }
    }

    #[test]
    fn zero_yaw_rate_turn_is_rejected_by_validation() {
        let mut cfg = builtin_scenario("turn").unwrap();
        cfg.ego = EgoTrajectory::ConstantTurn { speed: 1.0, yaw_rate: 0.0 };
        assert!(matches!(simulate(&cfg), Err(SynthError::BadConfig(_))));
    }
}
