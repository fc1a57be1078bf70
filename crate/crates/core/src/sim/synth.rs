//! Renders one pose into a detection frame.
//!
//! Face and hands are fronto-parallel disks centered on the eye and
//! fingertip. Foreground samples are drawn in point-symmetric pairs around
//! the projected center, so with exact depth and a centered box the pixel
//! centroid of any centered circular mask lands exactly on the true point.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::camera::{project, world_to_camera, CameraIntrinsics, Point3, World};
use crate::error::{Error, Result};
use crate::frame::{BoundingBox, DepthSample, DetectionFrame, Label, RoiPointSet};
use crate::pointing::{ground_intersection_world, pointing_angles, GoalPoint};

use super::scenario::{Aim, NoiseModel, Pose, Scenario};

const FACE_CONFIDENCE: f64 = 0.95;
const POINTING_HAND_CONFIDENCE: f64 = 0.9;
const IDLE_HAND_CONFIDENCE: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruth {
    pub eye: Point3<World>,
    pub fingertip: Point3<World>,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    /// Where the eye-to-fingertip ray meets the floor, if it descends.
    pub floor_goal: Option<GoalPoint>,
}

impl GroundTruth {
    /// Unit vector from the eye through the fingertip.
    pub fn ray(&self) -> Vector3<f64> {
        (self.fingertip - self.eye).normalize()
    }
}

/// Body points for one pose and aim.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseGeometry {
    pub eye: Point3<World>,
    pub fingertip: Point3<World>,
    pub idle_hand: Option<Point3<World>>,
}

fn aim_direction(pose: &Pose, eye: &Point3<World>, aim: &Aim) -> Result<Vector3<f64>> {
    match *aim {
        Aim::Direction { pitch_deg, yaw_deg } => {
            let p = pitch_deg.to_radians();
            let y = (pose.bearing_deg + yaw_deg).to_radians();
            Ok(Vector3::new(p.cos() * y.sin(), p.cos() * y.cos(), -p.sin()))
        }
        Aim::Target { x, y } => {
            let d = Point3::<World>::new(x, y, 0.0) - *eye;
            if d.norm() < 1e-9 {
                return Err(Error::PoseUnrenderable("target coincides with the eye".into()));
            }
            Ok(d.normalize())
        }
    }
}

/// Places eye, fingertip and resting hand. The fingertip lies on the aim
/// ray from the eye, at arm's length from the shoulder.
pub fn pose_geometry(scn: &Scenario, pose: &Pose, aim: &Aim) -> Result<PoseGeometry> {
    let s = &scn.subject;
    let feet = pose.feet();
    let eye = feet + Vector3::new(0.0, 0.0, s.eye_height);
    let dir = aim_direction(pose, &eye, aim)?;
    let shoulder = eye + pose.offset(s.shoulder_offset);
    let o = eye - shoulder;
    let b = o.dot(&dir);
    let disc = b * b - o.norm_squared() + s.arm_length * s.arm_length;
    if disc < 0.0 {
        return Err(Error::PoseUnrenderable("arm cannot reach the aim ray".into()));
    }
    let reach = -b + disc.sqrt();
    let fingertip = eye + dir * reach;
    let idle_hand = s.idle_hand.then(|| {
        let [lat, depth] = s.idle_hand_offset;
        feet + pose.offset([lat, depth, s.idle_hand_height])
    });
    Ok(PoseGeometry { eye, fingertip, idle_hand })
}

/// Projected disk: center pixel, depth, and pixel radii.
#[derive(Clone, Copy, Debug)]
struct DiskView {
    u: f64,
    v: f64,
    z: f64,
    r_u: f64,
    r_v: f64,
    half_u: f64,
    half_v: f64,
}

impl DiskView {
    fn new(p: &Point3<World>, radius: f64, margin: f64, intr: &CameraIntrinsics, what: &str) -> Result<Self> {
        let cam = world_to_camera(p, intr);
        if cam.z < 0.1 {
            return Err(Error::PoseUnrenderable(format!("{what} is behind or too close to the camera")));
        }
        let px = project(&cam, intr)?;
        let r_u = intr.fx * radius / px.z;
        let r_v = intr.fy * radius / px.z;
        let view = Self { u: px.u, v: px.v, z: px.z, r_u, r_v, half_u: margin * r_u, half_v: margin * r_v };
        let (w, h) = (f64::from(intr.width), f64::from(intr.height));
        if view.u - view.half_u < 0.0
            || view.u + view.half_u > w
            || view.v - view.half_v < 0.0
            || view.v + view.half_v > h
        {
            return Err(Error::PoseUnrenderable(format!("{what} box leaves the image")));
        }
        Ok(view)
    }

    fn v_min(&self) -> f64 {
        self.v - self.half_v
    }
}

struct Views {
    face: DiskView,
    hand: DiskView,
    idle: Option<DiskView>,
}

fn views(scn: &Scenario, geo: &PoseGeometry, intr: &CameraIntrinsics) -> Result<Views> {
    let s = &scn.subject;
    let face = DiskView::new(&geo.eye, s.face_radius, s.bbox_margin, intr, "face")?;
    let hand = DiskView::new(&geo.fingertip, s.hand_radius, s.bbox_margin, intr, "pointing hand")?;
    let idle =
        geo.idle_hand.map(|p| DiskView::new(&p, s.hand_radius, s.bbox_margin, intr, "resting hand")).transpose()?;
    if let Some(idle) = &idle {
        if idle.v_min() <= hand.v_min() {
            return Err(Error::PoseUnrenderable("resting hand is above the pointing hand".into()));
        }
    }
    Ok(Views { face, hand, idle })
}

/// Computes the pose geometry and checks that every box renders inside the
/// image with the pointing hand topmost.
pub fn render_pose(scn: &Scenario, pose: &Pose, aim: &Aim, intr: &CameraIntrinsics) -> Result<PoseGeometry> {
    let geo = pose_geometry(scn, pose, aim)?;
    views(scn, &geo, intr)?;
    Ok(geo)
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        sigma * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    }
}

fn render_disk<R: Rng + ?Sized>(
    view: &DiskView,
    label: Label,
    confidence: f64,
    noise: &NoiseModel,
    wall_z: f64,
    intr: &CameraIntrinsics,
    rng: &mut R,
) -> Option<RoiPointSet> {
    let cu = view.u + gauss(rng, noise.bbox_jitter_px);
    let cv = view.v + gauss(rng, noise.bbox_jitter_px);
    let raw = BoundingBox {
        u_min: cu - view.half_u,
        v_min: cv - view.half_v,
        u_max: cu + view.half_u,
        v_max: cv + view.half_v,
        label,
        confidence,
    };
    let bbox = raw.clamped(intr.width, intr.height)?;

    let n = noise.sample_count(view.z);
    let mut points: Vec<(f64, f64, f64)> = Vec::with_capacity(n + noise.background_count(n));
    if n % 2 == 1 {
        points.push((view.u, view.v, view.z));
    }
    for _ in 0..n / 2 {
        let rho = rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let du = view.r_u * rho * theta.cos();
        let dv = view.r_v * rho * theta.sin();
        points.push((view.u + du, view.v + dv, view.z));
        points.push((view.u - du, view.v - dv, view.z));
    }
    for _ in 0..noise.background_count(n) {
        // uniform over the box, outside the object disk
        for _ in 0..1000 {
            let u = raw.u_min + raw.width() * rng.random::<f64>();
            let v = raw.v_min + raw.height() * rng.random::<f64>();
            let e = ((u - view.u) / view.r_u).powi(2) + ((v - view.v) / view.r_v).powi(2);
            if e > 1.0 {
                points.push((u, v, wall_z));
                break;
            }
        }
    }

    let mut samples = Vec::with_capacity(points.len());
    for (u, v, z_true) in points {
        let z = z_true + gauss(rng, noise.depth_sigma(z_true));
        let p_drop = noise.dropout(z_true);
        if p_drop > 0.0 && rng.random_bool(p_drop) {
            continue;
        }
        if z > 0.0 && bbox.contains(u, v) {
            samples.push(DepthSample::new(u, v, z));
        }
    }
    samples.shuffle(rng);
    Some(RoiPointSet::new(bbox, samples))
}

/// Renders one frame of `pose` pointing along `aim` at time `t`.
/// All randomness is drawn from `rng`.
pub fn synthesize_frame<R: Rng + ?Sized>(
    scn: &Scenario,
    pose: &Pose,
    aim: &Aim,
    intr: &CameraIntrinsics,
    t: f64,
    rng: &mut R,
) -> Result<(DetectionFrame, GroundTruth)> {
    let geo = pose_geometry(scn, pose, aim)?;
    let v = views(scn, &geo, intr)?;
    let wall_z = pose.feet().y + scn.wall_offset;
    let noise = &scn.noise;

    let face = render_disk(&v.face, Label::Face, FACE_CONFIDENCE, noise, wall_z, intr, rng);
    let mut hands = Vec::with_capacity(2);
    if let Some(idle) = &v.idle {
        hands.extend(render_disk(idle, Label::Hand, IDLE_HAND_CONFIDENCE, noise, wall_z, intr, rng));
    }
    hands.extend(render_disk(&v.hand, Label::Hand, POINTING_HAND_CONFIDENCE, noise, wall_z, intr, rng));

    let (pitch_deg, yaw_deg) = pointing_angles(&(geo.eye - geo.fingertip))?;
    let truth = GroundTruth {
        eye: geo.eye,
        fingertip: geo.fingertip,
        pitch_deg,
        yaw_deg,
        floor_goal: ground_intersection_world(&geo.eye, &geo.fingertip).ok(),
    };
    Ok((DetectionFrame { timestamp: t, face, hands }, truth))
}
