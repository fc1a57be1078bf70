//! Per-frame pointing estimate: choose the pointing hand, build the
//! eye-to-hand ray, report its pitch/yaw and where it meets the floor.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{camera_to_world, Camera, CameraIntrinsics, Point3, World};
use crate::error::{Error, Result};
use crate::frame::{BoundingBox, DetectionFrame};
use crate::roi::{roi_keypoint, KeypointStrategy, RoiParams};

/// Rays whose vertical drop is below this (meters per unit of `P`) are
/// treated as never reaching the floor.
pub const MIN_DESCENT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointingEstimate {
    pub timestamp: f64,
    pub face_kp: Point3<World>,
    pub hand_kp: Point3<World>,
    /// `face_kp - hand_kp`; the pointing ray runs along `-direction`.
    pub direction: Vector3<f64>,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub strategy: KeypointStrategy,
}

impl PointingEstimate {
    /// Unit vector from the face through the hand.
    pub fn ray(&self) -> Vector3<f64> {
        (-self.direction).normalize()
    }
}

/// A point on the ground plane (world Z = 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPoint {
    pub x: f64,
    pub y: f64,
}

impl GoalPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn z(&self) -> f64 {
        0.0
    }

    pub fn to_point(&self) -> Point3<World> {
        Point3::new(self.x, self.y, 0.0)
    }

    pub fn distance(&self, other: &GoalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Why a frame produced no estimate (or, for `NoGroundHit`, no goal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    NoFace,
    NoHand,
    EmptyRoi,
    NoCluster,
    NoGroundHit,
    DegenerateDirection,
}

impl Reason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::NoFace => "no_face",
            Reason::NoHand => "no_hand",
            Reason::EmptyRoi => "empty_roi",
            Reason::NoCluster => "no_cluster",
            Reason::NoGroundHit => "no_ground_hit",
            Reason::DegenerateDirection => "degenerate_direction",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of running one frame through the pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameEstimate {
    pub timestamp: f64,
    pub estimate: Option<PointingEstimate>,
    pub goal: Option<GoalPoint>,
    pub reason: Option<Reason>,
}

impl FrameEstimate {
    fn absent(timestamp: f64, reason: Reason) -> Self {
        Self { timestamp, estimate: None, goal: None, reason: Some(reason) }
    }

    pub fn to_record(&self) -> EstimateRecord {
        EstimateRecord {
            t: self.timestamp,
            face: self.estimate.map(|e| e.face_kp.to_array()),
            hand: self.estimate.map(|e| e.hand_kp.to_array()),
            pitch_deg: self.estimate.map(|e| e.pitch_deg),
            yaw_deg: self.estimate.map(|e| e.yaw_deg),
            goal: self.goal.map(|g| [g.x, g.y]),
            reason: self.reason,
        }
    }
}

/// Output line: `{t, face:[x,y,z], hand:[x,y,z], pitch_deg, yaw_deg, goal:[x,y]|null, reason|null}`.
/// Keypoints are world-frame meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    pub face: Option<[f64; 3]>,
    pub hand: Option<[f64; 3]>,
    pub pitch_deg: Option<f64>,
    pub yaw_deg: Option<f64>,
    pub goal: Option<[f64; 2]>,
    pub reason: Option<Reason>,
}

/// Index of the hand nearest the top of the image (smallest `v_min`).
/// Ties go to higher confidence, then to the leftmost box.
pub fn select_pointing_hand(hands: &[BoundingBox]) -> Result<usize> {
    hands
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.v_min
                .total_cmp(&b.v_min)
                .then(b.confidence.total_cmp(&a.confidence))
                .then(a.u_min.total_cmp(&b.u_min))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoHand)
}

/// Pitch and yaw (degrees) of the ray along `-direction`.
///
/// Yaw is measured from world +Y, positive toward +X (clockwise seen from
/// above), in (-180, 180]. Pitch is positive below the horizon. A vertical
/// ray has yaw 0.
pub fn pointing_angles(direction: &Vector3<f64>) -> Result<(f64, f64)> {
    let ray = -direction;
    if !(ray.norm() > 0.0) || !ray.iter().all(|c| c.is_finite()) {
        return Err(Error::DegenerateDirection);
    }
    let horizontal = ray.x.hypot(ray.y);
    let pitch = (-ray.z).atan2(horizontal).to_degrees();
    let mut yaw = if horizontal == 0.0 { 0.0 } else { ray.x.atan2(ray.y).to_degrees() };
    if yaw <= -180.0 {
        yaw += 360.0;
    }
    Ok((pitch, yaw))
}

/// Floor intersection of the ray from `face` through `hand`, both in the
/// world frame (heights already include the camera mounting height).
/// A face below the floor has no forward hit.
pub fn ground_intersection_world(face: &Point3<World>, hand: &Point3<World>) -> Result<GoalPoint> {
    let p = *face - *hand;
    if !(p.z >= MIN_DESCENT) || !(face.z >= 0.0) {
        return Err(Error::NoGroundIntersection(p.z));
    }
    let t = face.z / p.z;
    Ok(GoalPoint::new(face.x - t * p.x, face.y - t * p.y))
}

/// Floor intersection for camera-frame keypoints.
pub fn ground_intersection(
    face_kp: &Point3<Camera>,
    hand_kp: &Point3<Camera>,
    intr: &CameraIntrinsics,
) -> Result<GoalPoint> {
    ground_intersection_world(&camera_to_world(face_kp, intr), &camera_to_world(hand_kp, intr))
}

fn roi_reason(err: Error) -> Reason {
    match err {
        Error::NoTarget => Reason::NoCluster,
        _ => Reason::EmptyRoi,
    }
}

/// Runs one frame: hand selection, per-ROI keypoints, world transform,
/// angles and (when the ray descends) the floor goal. Never fails; a frame
/// without an estimate carries a reason code instead.
pub fn estimate_frame(
    frame: &DetectionFrame,
    strategy: KeypointStrategy,
    params: &RoiParams,
    intr: &CameraIntrinsics,
) -> FrameEstimate {
    let t = frame.timestamp;
    let Some(face) = &frame.face else {
        return FrameEstimate::absent(t, Reason::NoFace);
    };
    let boxes: Vec<BoundingBox> = frame.hands.iter().map(|h| h.source_bbox).collect();
    let Ok(hand_idx) = select_pointing_hand(&boxes) else {
        return FrameEstimate::absent(t, Reason::NoHand);
    };
    let hand = &frame.hands[hand_idx];

    let clip = |roi: &crate::frame::RoiPointSet| {
        roi.source_bbox.clamped(intr.width, intr.height).map(|b| {
            if b == roi.source_bbox {
                roi.clone()
            } else {
                roi.with_bbox(b)
            }
        })
    };
    let (Some(face), Some(hand)) = (clip(face), clip(hand)) else {
        return FrameEstimate::absent(t, Reason::EmptyRoi);
    };

    let face_cam = match roi_keypoint(&face, strategy, params, intr) {
        Ok(p) => p,
        Err(e) => return FrameEstimate::absent(t, roi_reason(e)),
    };
    let hand_cam = match roi_keypoint(&hand, strategy, params, intr) {
        Ok(p) => p,
        Err(e) => return FrameEstimate::absent(t, roi_reason(e)),
    };

    let face_kp = camera_to_world(&face_cam, intr);
    let hand_kp = camera_to_world(&hand_cam, intr);
    let direction = face_kp - hand_kp;
    let Ok((pitch_deg, yaw_deg)) = pointing_angles(&direction) else {
        return FrameEstimate::absent(t, Reason::DegenerateDirection);
    };
    let estimate = PointingEstimate { timestamp: t, face_kp, hand_kp, direction, pitch_deg, yaw_deg, strategy };
    match ground_intersection_world(&face_kp, &hand_kp) {
        Ok(goal) => FrameEstimate { timestamp: t, estimate: Some(estimate), goal: Some(goal), reason: None },
        Err(_) => {
            FrameEstimate { timestamp: t, estimate: Some(estimate), goal: None, reason: Some(Reason::NoGroundHit) }
        }
    }
}

/// Unsigned difference between two angles in degrees, wrapped to [0, 180].
pub fn angle_difference_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Angle in degrees between two non-zero vectors.
pub fn angle_between_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors.
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}
