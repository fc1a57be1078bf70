//! Scenario description: who stands where, where they point, and how the
//! simulated sensor degrades with range. Loaded from TOML; every field has a
//! default, so a file only needs the values it overrides.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Point3, World};
use crate::error::{Error, Result};

use super::synth::render_pose;

/// Stereo-style depth sensor degradation model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Depth noise scale: sigma(z) = sigma0 * z^2, with sigma0 in 1/m.
    pub sigma0: f64,
    /// Foreground sample count scale: n(z) = max(n_min, round(n0 / z^2)).
    pub n0: f64,
    pub n_min: usize,
    /// Dropout is zero up to `dropout_start` and rises linearly to `p_max`
    /// at `dropout_end` (meters), staying at `p_max` beyond.
    pub dropout_start: f64,
    pub dropout_end: f64,
    pub p_max: f64,
    /// Background samples per ROI as a fraction of the foreground count.
    pub background_fraction: f64,
    /// Standard deviation of the box center jitter, px.
    pub bbox_jitter_px: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma0: 0.004,
            n0: 120.0,
            n_min: 6,
            dropout_start: 2.8,
            dropout_end: 5.5,
            p_max: 0.6,
            background_fraction: 0.1,
            bbox_jitter_px: 0.5,
        }
    }
}

impl NoiseModel {
    /// Exact depth, no dropout, no background, no jitter.
    pub fn noiseless() -> Self {
        Self { sigma0: 0.0, p_max: 0.0, background_fraction: 0.0, bbox_jitter_px: 0.0, ..Self::default() }
    }

    pub fn depth_sigma(&self, z: f64) -> f64 {
        self.sigma0 * z * z
    }

    pub fn sample_count(&self, z: f64) -> usize {
        ((self.n0 / (z * z)).round() as usize).max(self.n_min)
    }

    pub fn dropout(&self, z: f64) -> f64 {
        if z <= self.dropout_start {
            0.0
        } else if z >= self.dropout_end {
            self.p_max
        } else {
            self.p_max * (z - self.dropout_start) / (self.dropout_end - self.dropout_start)
        }
    }

    pub fn background_count(&self, n: usize) -> usize {
        (self.background_fraction * n as f64).round() as usize
    }

    fn problems(&self, out: &mut Vec<String>) {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            out.push(format!("noise.sigma0 must be >= 0 (got {})", self.sigma0));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            out.push(format!("noise.n0 must be > 0 (got {})", self.n0));
        }
        if self.n_min < 1 {
            out.push("noise.n_min must be >= 1".into());
        }
        if !(self.dropout_start < self.dropout_end) {
            out.push("noise.dropout_start must be below noise.dropout_end".into());
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            out.push(format!("noise.p_max must lie in [0, 1] (got {})", self.p_max));
        }
        if !(0.0..=1.0).contains(&self.background_fraction) {
            out.push(format!("noise.background_fraction must lie in [0, 1] (got {})", self.background_fraction));
        }
        if !(self.bbox_jitter_px >= 0.0 && self.bbox_jitter_px.is_finite()) {
            out.push(format!("noise.bbox_jitter_px must be >= 0 (got {})", self.bbox_jitter_px));
        }
    }
}

/// Body geometry of the simulated person. Offsets are in the subject frame:
/// `[lateral (+ = image right), depth (+ = away from camera), vertical]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectModel {
    pub height: f64,
    pub eye_height: f64,
    /// Pointing shoulder relative to the eye.
    pub shoulder_offset: [f64; 3],
    pub arm_length: f64,
    pub face_radius: f64,
    pub hand_radius: f64,
    /// Box half-size as a multiple of the projected object radius.
    pub bbox_margin: f64,
    pub idle_hand: bool,
    /// Resting hand `[lateral, depth]` relative to the feet.
    pub idle_hand_offset: [f64; 2],
    pub idle_hand_height: f64,
}

impl Default for SubjectModel {
    fn default() -> Self {
        Self {
            height: 1.72,
            eye_height: 1.6,
            shoulder_offset: [-0.18, 0.0, -0.25],
            arm_length: 0.65,
            face_radius: 0.09,
            hand_radius: 0.05,
            bbox_margin: 1.45,
            idle_hand: true,
            idle_hand_offset: [0.22, 0.0],
            idle_hand_height: 0.75,
        }
    }
}

impl SubjectModel {
    fn problems(&self, out: &mut Vec<String>) {
        if !(self.height > 0.0) {
            out.push("subject.height must be > 0".into());
        }
        if !(self.eye_height > 0.0 && self.eye_height <= self.height) {
            out.push(format!("subject.eye_height must lie in (0, height] (got {})", self.eye_height));
        }
        if !(self.arm_length > 0.0) {
            out.push("subject.arm_length must be > 0".into());
        }
        let s = self.shoulder_offset;
        if (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() >= self.arm_length {
            out.push("subject.shoulder_offset must be shorter than arm_length".into());
        }
        if !(self.face_radius > 0.0 && self.hand_radius > 0.0) {
            out.push("subject face/hand radii must be > 0".into());
        }
        if !(self.bbox_margin >= 1.0) {
            out.push(format!("subject.bbox_margin must be >= 1 (got {})", self.bbox_margin));
        }
        if !(self.idle_hand_height > 0.0 && self.idle_hand_height < self.eye_height) {
            out.push("subject.idle_hand_height must lie in (0, eye_height)".into());
        }
    }
}

/// Standing position: horizontal range from the camera and bearing
/// (degrees, positive toward image right).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub range: f64,
    pub bearing_deg: f64,
}

impl Pose {
    pub fn new(range: f64, bearing_deg: f64) -> Self {
        Self { range, bearing_deg }
    }

    /// Unit vector from the camera through the subject, on the floor.
    pub fn away_axis(&self) -> [f64; 2] {
        let b = self.bearing_deg.to_radians();
        [b.sin(), b.cos()]
    }

    /// Unit vector toward image right, perpendicular to [`Pose::away_axis`].
    pub fn lateral_axis(&self) -> [f64; 2] {
        let b = self.bearing_deg.to_radians();
        [b.cos(), -b.sin()]
    }

    pub fn feet(&self) -> Point3<World> {
        let [ax, ay] = self.away_axis();
        Point3::new(self.range * ax, self.range * ay, 0.0)
    }

    /// Subject-frame offset `[lateral, depth, vertical]` to world.
    pub fn offset(&self, o: [f64; 3]) -> nalgebra::Vector3<f64> {
        let [lx, ly] = self.lateral_axis();
        let [ax, ay] = self.away_axis();
        nalgebra::Vector3::new(o[0] * lx + o[1] * ax, o[0] * ly + o[1] * ay, o[2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointingDirection {
    pub name: String,
    /// Degrees below the horizon.
    pub pitch_deg: f64,
    /// Degrees from the camera-to-subject axis, positive toward image right.
    pub yaw_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorTarget {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

/// What the subject points at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aim {
    /// Relative direction, as in [`PointingDirection`].
    Direction { pitch_deg: f64, yaw_deg: f64 },
    /// A world-frame point on the floor.
    Target { x: f64, y: f64 },
}

impl From<&PointingDirection> for Aim {
    fn from(d: &PointingDirection) -> Self {
        Aim::Direction { pitch_deg: d.pitch_deg, yaw_deg: d.yaw_deg }
    }
}

impl From<&FloorTarget> for Aim {
    fn from(t: &FloorTarget) -> Self {
        Aim::Target { x: t.x, y: t.y }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionGrid {
    pub ranges: Vec<f64>,
    pub bearings_deg: Vec<f64>,
}

impl Default for PositionGrid {
    fn default() -> Self {
        Self { ranges: vec![1.5, 2.5, 3.5, 4.5, 5.5], bearings_deg: vec![-15.0, -7.5, 0.0, 7.5, 15.0] }
    }
}

impl PositionGrid {
    /// Range-major list of poses.
    pub fn poses(&self) -> Vec<Pose> {
        self.ranges.iter().flat_map(|&r| self.bearings_deg.iter().map(move |&b| Pose::new(r, b))).collect()
    }
}

/// Floor-target protocol: the subject stands at each distance and points
/// at each marked target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloorSetup {
    pub distances: Vec<f64>,
    pub bearing_deg: f64,
    pub targets: Vec<FloorTarget>,
}

impl Default for FloorSetup {
    fn default() -> Self {
        Self {
            distances: vec![1.5, 2.5, 3.5, 4.5, 5.5],
            bearing_deg: 0.0,
            targets: vec![
                FloorTarget { name: "left".into(), x: -1.0, y: 1.0 },
                FloorTarget { name: "right".into(), x: 1.0, y: 2.0 },
                FloorTarget { name: "near".into(), x: 0.3, y: 0.6 },
            ],
        }
    }
}

impl FloorSetup {
    pub fn poses(&self) -> Vec<Pose> {
        self.distances.iter().map(|&d| Pose::new(d, self.bearing_deg)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub frames_per_pose: usize,
    pub frame_rate: f64,
    /// Distance of the background wall behind the subject, meters.
    pub wall_offset: f64,
    pub subject: SubjectModel,
    pub noise: NoiseModel,
    pub grid: PositionGrid,
    pub directions: Vec<PointingDirection>,
    pub floor: FloorSetup,
}

impl Default for Scenario {
    fn default() -> Self {
        let dir =
            |name: &str, pitch_deg: f64, yaw_deg: f64| PointingDirection { name: name.into(), pitch_deg, yaw_deg };
        Self {
            seed: 42,
            frames_per_pose: 200,
            frame_rate: 30.0,
            wall_offset: 1.5,
            subject: SubjectModel::default(),
            noise: NoiseModel::default(),
            grid: PositionGrid::default(),
            directions: vec![
                dir("away", 30.0, 0.0),
                dir("toward", 30.0, 180.0),
                dir("right", 25.0, 45.0),
                dir("left", 25.0, -45.0),
            ],
            floor: FloorSetup::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks every field and that every pose/aim pair renders inside the
    /// image. All problems are reported together.
    pub fn validate(&self, intr: &CameraIntrinsics) -> Result<()> {
        let mut problems = Vec::new();
        if self.frames_per_pose == 0 {
            problems.push("frames_per_pose must be >= 1".into());
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            problems.push(format!("frame_rate must be > 0 (got {})", self.frame_rate));
        }
        if !(self.wall_offset > 0.0) {
            problems.push(format!("wall_offset must be > 0 (got {})", self.wall_offset));
        }
        self.subject.problems(&mut problems);
        self.noise.problems(&mut problems);

        let half_fov = intr.hfov_deg / 2.0;
        let check_pose = |p: &Pose, what: &str, out: &mut Vec<String>| {
            if !(p.range > 0.0 && p.range.is_finite()) {
                out.push(format!("{what}: range must be > 0 (got {})", p.range));
            }
            if !(p.bearing_deg.abs() < half_fov) {
                out.push(format!(
                    "{what}: bearing {} deg outside the camera field of view (+-{half_fov} deg)",
                    p.bearing_deg
                ));
            }
        };
        if self.grid.ranges.is_empty() || self.grid.bearings_deg.is_empty() {
            problems.push("grid needs at least one range and one bearing".into());
        }
        for p in self.grid.poses() {
            check_pose(&p, "grid", &mut problems);
        }
        if self.directions.is_empty() {
            problems.push("at least one pointing direction is required".into());
        }
        for d in &self.directions {
            if !(d.pitch_deg.abs() < 90.0) {
                problems.push(format!("direction `{}`: pitch must lie in (-90, 90)", d.name));
            }
        }
        for p in self.floor.poses() {
            check_pose(&p, "floor", &mut problems);
        }
        if self.floor.targets.is_empty() && !self.floor.distances.is_empty() {
            problems.push("floor setup needs at least one target".into());
        }

        if problems.is_empty() {
            let aims_a: Vec<(String, Aim)> = self.directions.iter().map(|d| (d.name.clone(), Aim::from(d))).collect();
            let aims_b: Vec<(String, Aim)> =
                self.floor.targets.iter().map(|t| (t.name.clone(), Aim::from(t))).collect();
            for (poses, aims) in [(self.grid.poses(), &aims_a), (self.floor.poses(), &aims_b)] {
                for pose in &poses {
                    for (name, aim) in aims {
                        if let Err(e) = render_pose(self, pose, aim, intr) {
                            problems.push(format!(
                                "pose (range {} m, bearing {} deg) aiming `{name}`: {e}",
                                pose.range, pose.bearing_deg
                            ));
                        }
                    }
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        Scenario::default().validate(&CameraIntrinsics::default()).unwrap();
        assert_eq!(Scenario::default().grid.poses().len(), 25);
        assert_eq!(Scenario::default().directions.len(), 4);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let s = Scenario::default();
        assert_eq!(Scenario::from_toml_str(&s.to_toml_string()).unwrap(), s);
        let partial = Scenario::from_toml_str("seed = 7\n[noise]\nsigma0 = 0.0\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.noise.sigma0, 0.0);
        assert_eq!(partial.noise.n0, NoiseModel::default().n0);
        assert!(Scenario::from_toml_str("sede = 7\n").is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut s = Scenario { frames_per_pose: 0, ..Scenario::default() };
        s.noise.p_max = 1.5;
        s.grid.bearings_deg = vec![60.0];
        let Err(Error::InvalidScenario(problems)) = s.validate(&CameraIntrinsics::default()) else {
            panic!("expected invalid scenario");
        };
        assert_eq!(problems.len(), 1 + 1 + s.grid.ranges.len(), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("frames_per_pose")));
        assert!(problems.iter().any(|p| p.contains("p_max")));
        assert!(problems.iter().any(|p| p.contains("field of view")));
    }

    #[test]
    fn unrenderable_pose_is_caught() {
        let mut s = Scenario::default();
        s.grid.ranges = vec![0.4];
        let err = s.validate(&CameraIntrinsics::default()).unwrap_err();
        assert!(err.to_string().contains("aiming"), "{err}");
    }

    #[test]
    fn noise_model_shapes() {
        let n = NoiseModel::default();
        assert!((n.depth_sigma(1.6) - 0.01024).abs() < 1e-12);
        assert_eq!(n.sample_count(1.0), 120);
        assert_eq!(n.sample_count(10.0), n.n_min);
        assert_eq!(n.dropout(2.0), 0.0);
        assert_eq!(n.dropout(2.8), 0.0);
        assert!((n.dropout(4.15) - 0.3).abs() < 1e-12);
        assert_eq!(n.dropout(9.0), n.p_max);
        let b = NoiseModel { background_fraction: 0.3, ..n };
        assert_eq!(b.background_count(100), 30);
    }

    #[test]
    fn pose_axes() {
        let p = Pose::new(2.0, 0.0);
        assert_eq!(p.feet().to_array(), [0.0, 2.0, 0.0]);
        let o = p.offset([0.5, 1.0, 0.2]);
        assert!((o.x - 0.5).abs() < 1e-15 && (o.y - 1.0).abs() < 1e-15 && o.z == 0.2);
    }
}
