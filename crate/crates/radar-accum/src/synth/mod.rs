//! Deterministic synthetic driving scenes with exact ground truth.
//!
//! A scenario is static structure (ground patch, walls, poles), a set of
//! rigidly moving box objects, and an ego trajectory with closed-form poses.
//! Radar scatterers are sampled once and persist across frames, like real
//! reflection centers; lidar points are re-drawn every frame. All randomness
//! comes from one seeded generator, so a config reproduces its sequence
//! byte for byte.

mod simulate;

pub use simulate::{
    simulate, FrameTruth, GroundTruth, ObjectState, PointTruth, SynthError,
};

use serde::{Deserialize, Serialize};

use crate::{RigidTransform, UnitQuaternion, Vec3};

/// Closed-form ego trajectories; poses and velocities are exact at any time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum EgoTrajectory {
    /// Straight line at a fixed world velocity, heading fixed at zero yaw.
    ConstantVelocity { velocity: [f64; 3] },
    /// Circular arc in the ground plane at fixed speed and yaw rate.
    ConstantTurn { speed: f64, yaw_rate: f64 },
}

impl EgoTrajectory {
    /// Ego-to-world pose at time `t`.
    pub fn pose_at(&self, t: f64) -> RigidTransform {
        match *self {
            EgoTrajectory::ConstantVelocity { velocity } => {
                RigidTransform::from_translation(Vec3::from(velocity) * t)
            }
            EgoTrajectory::ConstantTurn { speed, yaw_rate } => {
                let radius = speed / yaw_rate;
                let a = yaw_rate * t;
                RigidTransform::new(
                    UnitQuaternion::from_rotation_z(a),
                    Vec3::new(radius * a.sin(), radius * (1.0 - a.cos()), 0.0),
                )
            }
        }
    }

    /// World-frame ego velocity at time `t`.
    pub fn velocity_at(&self, t: f64) -> Vec3 {
        match *self {
            EgoTrajectory::ConstantVelocity { velocity } => Vec3::from(velocity),
            EgoTrajectory::ConstantTurn { speed, yaw_rate } => {
                let a = yaw_rate * t;
                Vec3::new(speed * a.cos(), speed * a.sin(), 0.0)
            }
        }
    }

    /// Yaw rate about +z, constant for both trajectory kinds.
    pub fn yaw_rate(&self) -> f64 {
        match *self {
            EgoTrajectory::ConstantVelocity { .. } => 0.0,
            EgoTrajectory::ConstantTurn { yaw_rate, .. } => yaw_rate,
        }
    }

    /// Ego yaw at time `t`.
    pub fn yaw_at(&self, t: f64) -> f64 {
        self.yaw_rate() * t
    }
}

/// Horizontal rectangle of drivable ground.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroundPatch {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: f64,
}

/// Vertical rectangular wall between two ground points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Wall {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub base_z: f64,
    pub height: f64,
}

/// Vertical cylinder (lamp post, tree trunk).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Pole {
    pub center: [f64; 2],
    pub base_z: f64,
    pub height: f64,
    pub radius: f64,
}

/// A rigid box object moving at constant world velocity with fixed heading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub track_id: i64,
    pub class_name: String,
    /// Length (along heading), width, height.
    pub dimensions: [f64; 3],
    pub initial_center: [f64; 3],
    pub velocity: [f64; 3],
    /// Heading about +z; defaults to the velocity direction (0 if still).
    #[serde(default)]
    pub yaw: Option<f64>,
    /// Persistent radar scatterers sampled on the object's surface.
    pub scatter_count: usize,
    /// Marks parked infrastructure; implies zero velocity.
    #[serde(default)]
    pub is_static: bool,
}

impl ObjectSpec {
    pub fn heading(&self) -> f64 {
        match self.yaw {
            Some(yaw) => yaw,
            None => {
                let v = Vec3::from(self.velocity);
                if v.norm() > 0.0 {
                    v.y.atan2(v.x)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Measurement corruption applied to both sensors.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Per-axis Gaussian position noise, meters.
    pub position_sigma: f64,
    /// Gaussian radial-velocity noise, m/s.
    pub vrr_sigma: f64,
    /// Probability of losing a return entirely.
    pub dropout: f64,
    /// Round generated values through the 32-bit storage format, so the
    /// in-memory sequence is bit-identical to a written-and-reloaded one.
    /// Turn off for analyses that need full-precision geometry.
    pub quantize_to_storage: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            position_sigma: 0.0,
            vrr_sigma: 0.0,
            dropout: 0.0,
            quantize_to_storage: true,
        }
    }
}

/// Full description of a synthetic recording.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Seconds of driving; frames cover `[0, duration]` inclusive.
    pub duration: f64,
    /// Sensor tick rate in Hz.
    pub frame_rate: f64,
    /// When set, every nth tick is dropped from the recording, leaving
    /// irregular timestamp gaps while frame ids stay consecutive.
    #[serde(default)]
    pub drop_every_nth_tick: Option<u32>,
    pub ego: EgoTrajectory,
    #[serde(default)]
    pub ground: Option<GroundPatch>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub poles: Vec<Pole>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub seed: u64,
    /// Returns beyond this range are discarded.
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    /// Radar-to-ego translation (identity rotation).
    #[serde(default = "default_radar_mounting")]
    pub radar_mounting: [f64; 3],
    /// Lidar-to-ego translation (identity rotation).
    #[serde(default = "default_lidar_mounting")]
    pub lidar_mounting: [f64; 3],
    /// Lidar samples per square meter of visible surface, per frame.
    #[serde(default = "default_lidar_density")]
    pub lidar_density: f64,
    /// Radar scatterer density on static structure, as a fraction of
    /// `lidar_density`.
    #[serde(default = "default_radar_density_scale")]
    pub radar_density_scale: f64,
}

fn default_max_range() -> f64 {
    50.0
}

fn default_radar_mounting() -> [f64; 3] {
    [1.5, 0.0, 0.5]
}

fn default_lidar_mounting() -> [f64; 3] {
    [0.8, 0.0, 1.6]
}

fn default_lidar_density() -> f64 {
    2.0
}

fn default_radar_density_scale() -> f64 {
    0.25
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::BadConfig(msg));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad(format!("frame rate must be positive, got {}", self.frame_rate));
        }
        if let Some(n) = self.drop_every_nth_tick {
            if n < 2 {
                return bad(format!("drop_every_nth_tick must be at least 2, got {}", n));
            }
        }
        if let EgoTrajectory::ConstantTurn { speed, yaw_rate } = self.ego {
            if !speed.is_finite() || !yaw_rate.is_finite() || yaw_rate == 0.0 {
                return bad(format!(
                    "constant turn needs a finite speed and nonzero yaw rate, got {} and {}",
                    speed, yaw_rate
                ));
            }
        }
        if !(self.max_range > 0.0) {
            return bad(format!("max range must be positive, got {}", self.max_range));
        }
        if !(self.lidar_density >= 0.0) || !(self.radar_density_scale >= 0.0) {
            return bad("densities must be non-negative".to_string());
        }
        let n = &self.noise;
        if !(n.position_sigma >= 0.0) || !(n.vrr_sigma >= 0.0) {
            return bad("noise sigmas must be non-negative".to_string());
        }
        if !(0.0..1.0).contains(&n.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", n.dropout));
        }
        if let Some(g) = &self.ground {
            if g.x[0] >= g.x[1] || g.y[0] >= g.y[1] {
                return bad("ground patch extents must be increasing".to_string());
            }
        }
        for w in &self.walls {
            let len = ((w.end[0] - w.start[0]).powi(2) + (w.end[1] - w.start[1]).powi(2)).sqrt();
            if len <= 0.0 || w.height <= 0.0 {
                return bad("walls need positive length and height".to_string());
            }
        }
        for p in &self.poles {
            if p.radius <= 0.0 || p.height <= 0.0 {
                return bad("poles need positive radius and height".to_string());
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.track_id) {
                return bad(format!("duplicate track id {}", o.track_id));
            }
            if o.dimensions.iter().any(|&d| !(d > 0.0)) {
                return bad(format!("object {} needs positive dimensions", o.track_id));
            }
            if o.class_name.is_empty() || o.class_name.contains(char::is_whitespace) {
                return bad(format!("object {} has an invalid class name", o.track_id));
            }
            if o.scatter_count == 0 {
                return bad(format!("object {} needs at least one scatterer", o.track_id));
            }
            if o.is_static && Vec3::from(o.velocity).norm() > 0.0 {
                return bad(format!("static object {} must not move", o.track_id));
            }
        }
        Ok(())
    }
}

/// Cruising speed shared by the built-in scenarios: 15 km/h.
pub const CRUISE_SPEED: f64 = 4.167;

/// Names of the scenarios returned by [`builtin_scenarios`], in order.
pub const BUILTIN_SCENARIO_NAMES: [&str; 5] = [
    "straight-15kmh",
    "turn",
    "oncoming-car",
    "crossing-cyclist",
    "cluttered-urban",
];

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// The standard evaluation set: a noise-free straight drive, a constant
/// turn, a radially approaching car, a tangentially crossing cyclist, and a
/// noisy cluttered scene with mixed movers and parked structure.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let corridor = |x0: f64, x1: f64, half_width: f64| {
        (
            Some(GroundPatch { x: [x0, x1], y: [-half_width, half_width], z: 0.0 }),
            vec![
                Wall { start: [x0, half_width], end: [x1, half_width], base_z: 0.0, height: 2.5 },
                Wall {
                    start: [x0, -half_width],
                    end: [x1, -half_width],
                    base_z: 0.0,
                    height: 2.5,
                },
            ],
        )
    };

    let straight = {
        let (ground, walls) = corridor(-5.0, 55.0, 7.5);
        ScenarioConfig {
            name: "straight-15kmh".to_string(),
            duration: 10.0,
            frame_rate: 10.0,
            drop_every_nth_tick: None,
            ego: EgoTrajectory::ConstantVelocity { velocity: [CRUISE_SPEED, 0.0, 0.0] },
            ground,
            walls,
            poles: Vec::new(),
            objects: Vec::new(),
            noise: NoiseConfig::default(),
            seed: 11,
            max_range: default_max_range(),
            radar_mounting: default_radar_mounting(),
            lidar_mounting: default_lidar_mounting(),
            lidar_density: default_lidar_density(),
            radar_density_scale: default_radar_density_scale(),
        }
    };

    let turn = ScenarioConfig {
        name: "turn".to_string(),
        duration: 5.0,
        frame_rate: 10.0,
        drop_every_nth_tick: None,
        ego: EgoTrajectory::ConstantTurn { speed: CRUISE_SPEED, yaw_rate: 0.2 },
        ground: Some(GroundPatch { x: [-8.0, 35.0], y: [-8.0, 30.0], z: 0.0 }),
        walls: vec![
            Wall { start: [-8.0, -8.0], end: [35.0, -8.0], base_z: 0.0, height: 2.5 },
            Wall { start: [35.0, -8.0], end: [35.0, 30.0], base_z: 0.0, height: 2.5 },
        ],
        poles: vec![
            Pole { center: [5.0, 12.0], base_z: 0.0, height: 4.0, radius: 0.15 },
            Pole { center: [12.0, 20.0], base_z: 0.0, height: 4.0, radius: 0.15 },
            Pole { center: [24.0, 6.0], base_z: 0.0, height: 4.0, radius: 0.15 },
            Pole { center: [0.0, 24.0], base_z: 0.0, height: 4.0, radius: 0.15 },
        ],
        objects: Vec::new(),
        noise: NoiseConfig::default(),
        seed: 12,
        max_range: default_max_range(),
        radar_mounting: default_radar_mounting(),
        lidar_mounting: default_lidar_mounting(),
        lidar_density: default_lidar_density(),
        radar_density_scale: default_radar_density_scale(),
    };

    let oncoming = {
        let (ground, walls) = corridor(-5.0, 55.0, 8.0);
        ScenarioConfig {
            name: "oncoming-car".to_string(),
            duration: 3.0,
            frame_rate: 10.0,
            drop_every_nth_tick: None,
            ego: EgoTrajectory::ConstantVelocity { velocity: [CRUISE_SPEED, 0.0, 0.0] },
            ground,
            walls,
            poles: Vec::new(),
            objects: vec![ObjectSpec {
                track_id: 1,
                class_name: "car".to_string(),
                dimensions: [4.5, 1.8, 1.5],
                initial_center: [35.0, 0.0, 0.75],
                velocity: [-5.0, 0.0, 0.0],
                yaw: None,
                scatter_count: 40,
                is_static: false,
            }],
            noise: NoiseConfig::default(),
            seed: 13,
            max_range: default_max_range(),
            radar_mounting: default_radar_mounting(),
            lidar_mounting: default_lidar_mounting(),
            lidar_density: default_lidar_density(),
            radar_density_scale: default_radar_density_scale(),
        }
    };

    let crossing = {
        let (ground, walls) = corridor(-5.0, 45.0, 12.0);
        ScenarioConfig {
            name: "crossing-cyclist".to_string(),
            duration: 3.0,
            frame_rate: 10.0,
            drop_every_nth_tick: None,
            ego: EgoTrajectory::ConstantVelocity { velocity: [CRUISE_SPEED, 0.0, 0.0] },
            ground,
            walls,
            poles: Vec::new(),
            objects: vec![ObjectSpec {
                track_id: 2,
                class_name: "cyclist".to_string(),
                dimensions: [1.8, 0.6, 1.7],
                initial_center: [20.0, -10.0, 0.85],
                velocity: [0.0, 4.0, 0.0],
                yaw: None,
                scatter_count: 30,
                is_static: false,
            }],
            noise: NoiseConfig::default(),
            seed: 14,
            max_range: default_max_range(),
            radar_mounting: default_radar_mounting(),
            lidar_mounting: default_lidar_mounting(),
            lidar_density: default_lidar_density(),
            radar_density_scale: default_radar_density_scale(),
        }
    };

    let cluttered = {
        let (ground, walls) = corridor(-5.0, 50.0, 10.0);
        ScenarioConfig {
            name: "cluttered-urban".to_string(),
            duration: 5.0,
            frame_rate: 10.0,
            drop_every_nth_tick: Some(4),
            ego: EgoTrajectory::ConstantVelocity { velocity: [CRUISE_SPEED, 0.0, 0.0] },
            ground,
            walls,
            poles: vec![
                Pole { center: [5.0, 7.0], base_z: 0.0, height: 4.0, radius: 0.15 },
                Pole { center: [10.0, -6.0], base_z: 0.0, height: 4.0, radius: 0.15 },
                Pole { center: [18.0, 8.0], base_z: 0.0, height: 4.0, radius: 0.15 },
                Pole { center: [26.0, -7.0], base_z: 0.0, height: 4.0, radius: 0.15 },
                Pole { center: [33.0, 6.0], base_z: 0.0, height: 4.0, radius: 0.15 },
                Pole { center: [40.0, -5.0], base_z: 0.0, height: 4.0, radius: 0.15 },
            ],
            objects: vec![
                ObjectSpec {
                    track_id: 1,
                    class_name: "car".to_string(),
                    dimensions: [4.5, 1.8, 1.5],
                    initial_center: [30.0, 3.0, 0.75],
                    velocity: [-4.0, -1.0, 0.0],
                    yaw: None,
                    scatter_count: 40,
                    is_static: false,
                },
                ObjectSpec {
                    track_id: 2,
                    class_name: "cyclist".to_string(),
                    dimensions: [1.8, 0.6, 1.7],
                    initial_center: [15.0, 6.0, 0.85],
                    velocity: [2.5, -1.5, 0.0],
                    yaw: None,
                    scatter_count: 30,
                    is_static: false,
                },
                ObjectSpec {
                    track_id: 3,
                    class_name: "pedestrian".to_string(),
                    dimensions: [0.6, 0.6, 1.8],
                    initial_center: [22.0, -4.0, 0.9],
                    velocity: [-1.0, 0.66, 0.0],
                    yaw: None,
                    scatter_count: 20,
                    is_static: false,
                },
                // Parked bicycle racks: static tracked structure for the
                // object-alignment estimator, deliberately non-collinear.
                ObjectSpec {
                    track_id: 10,
                    class_name: "rack".to_string(),
                    dimensions: [1.2, 0.8, 1.5],
                    initial_center: [10.0, 6.0, 0.75],
                    velocity: [0.0, 0.0, 0.0],
                    yaw: Some(0.3),
                    scatter_count: 12,
                    is_static: true,
                },
                ObjectSpec {
                    track_id: 11,
                    class_name: "rack".to_string(),
                    dimensions: [1.2, 0.8, 1.5],
                    initial_center: [18.0, -5.0, 0.75],
                    velocity: [0.0, 0.0, 0.0],
                    yaw: Some(-0.5),
                    scatter_count: 12,
                    is_static: true,
                },
                ObjectSpec {
                    track_id: 12,
                    class_name: "rack".to_string(),
                    dimensions: [1.2, 0.8, 1.5],
                    initial_center: [30.0, 7.0, 0.75],
                    velocity: [0.0, 0.0, 0.0],
                    yaw: Some(1.0),
                    scatter_count: 12,
                    is_static: true,
                },
                ObjectSpec {
                    track_id: 13,
                    class_name: "rack".to_string(),
                    dimensions: [1.2, 0.8, 1.5],
                    initial_center: [25.0, -8.0, 0.75],
                    velocity: [0.0, 0.0, 0.0],
                    yaw: Some(0.0),
                    scatter_count: 12,
                    is_static: true,
                },
            ],
            noise: NoiseConfig {
                position_sigma: 0.02,
                vrr_sigma: 0.05,
                dropout: 0.05,
                quantize_to_storage: true,
            },
            seed: 15,
            max_range: default_max_range(),
            radar_mounting: default_radar_mounting(),
            lidar_mounting: default_lidar_mounting(),
            lidar_density: default_lidar_density(),
            radar_density_scale: default_radar_density_scale(),
        }
    };

    vec![straight, turn, oncoming, crossing, cluttered]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_scenarios_validate_and_match_the_name_list() {
        let scenarios = builtin_scenarios();
        assert_eq!(scenarios.len(), BUILTIN_SCENARIO_NAMES.len());
        for (s, name) in scenarios.iter().zip(BUILTIN_SCENARIO_NAMES) {
            assert_eq!(s.name, name);
            s.validate().unwrap();
        }
        assert!(builtin_scenario("straight-15kmh").is_some());
        assert!(builtin_scenario("no-such-scene").is_none());
    }

    #[test]
    fn config_round_trips_through_json() {
        for s in builtin_scenarios() {
            let json = serde_json::to_string_pretty(&s).unwrap();
            let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back.name, s.name);
            assert_eq!(back.seed, s.seed);
            assert_eq!(back.objects.len(), s.objects.len());
            assert_eq!(back.noise.quantize_to_storage, s.noise.quantize_to_storage);
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = builtin_scenario("straight-15kmh").unwrap();
        cfg.duration = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = builtin_scenario("cluttered-urban").unwrap();
        cfg.objects[1].track_id = cfg.objects[0].track_id;
        assert!(cfg.validate().is_err());

        let mut cfg = builtin_scenario("cluttered-urban").unwrap();
        cfg.noise.dropout = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = builtin_scenario("turn").unwrap();
        cfg.ego = EgoTrajectory::ConstantTurn { speed: 4.0, yaw_rate: 0.0 };
        assert!(cfg.validate().is_err());

        let mut cfg = builtin_scenario("cluttered-urban").unwrap();
        cfg.objects[3].velocity = [0.5, 0.0, 0.0];
        assert!(cfg.validate().is_err(), "static objects must not move");
    }

    #[test]
    fn constant_turn_pose_matches_its_velocity_derivative() {
        let ego = EgoTrajectory::ConstantTurn { speed: 4.167, yaw_rate: 0.2 };
        let (t, h) = (2.0, 1e-6);
        let numeric = (ego.pose_at(t + h).translation - ego.pose_at(t - h).translation)
            / (2.0 * h);
        let analytic = ego.velocity_at(t);
        assert_relative_eq!(numeric.x, analytic.x, epsilon = 1e-6);
        assert_relative_eq!(numeric.y, analytic.y, epsilon = 1e-6);
        assert_relative_eq!(ego.pose_at(t).rotation.angle(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn heading_defaults_to_velocity_direction() {
        let spec = ObjectSpec {
            track_id: 1,
            class_name: "cyclist".to_string(),
            dimensions: [1.8, 0.6, 1.7],
            initial_center: [0.0, 0.0, 0.85],
            velocity: [0.0, 4.0, 0.0],
            yaw: None,
            scatter_count: 1,
            is_static: false,
        };
        assert_relative_eq!(spec.heading(), std::f64::consts::FRAC_PI_2);
        let mut still = spec.clone();
        still.velocity = [0.0, 0.0, 0.0];
        assert_eq!(still.heading(), 0.0);
        let mut fixed = spec;
        fixed.yaw = Some(1.2);
        assert_eq!(fixed.heading(), 1.2);
    }
}
