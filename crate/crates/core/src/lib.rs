//! Pointing-gesture estimation from face and hand detections carrying sparse
//! depth samples.
//!
//! The pipeline per frame: pick the pointing hand, reject depth outliers in
//! each region (a centered circular mask or depth clustering), reduce each
//! region to a 3D keypoint, and intersect the eye-to-hand ray with the floor.
//! A Kalman bank can smooth detections across frames, and a sliding window
//! commits a floor goal once recent goals agree.
//!
//! [`sim`] generates synthetic frames with exact ground truth and runs the
//! accuracy experiments; [`report`] writes their tables and charts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod frame;
pub mod latency;
pub mod pipeline;
pub mod pointing;
pub mod report;
pub mod roi;
pub mod sim;
pub mod tracking;

pub use camera::{camera_to_world, deproject, project, world_to_camera, Camera, CameraIntrinsics, Point3, World};
pub use error::{Error, Result};
pub use frame::{BoundingBox, DepthSample, DetectionFrame, Label, RoiPointSet, StreamValidator};
pub use pipeline::{FrameOutput, Pipeline, PipelineConfig};
pub use pointing::{
    estimate_frame, ground_intersection, pointing_angles, select_pointing_hand, EstimateRecord, FrameEstimate,
    GoalPoint, PointingEstimate, Reason,
};
pub use roi::{cobb_filter, dbscan_depth, estimate_keypoint, select_target_cluster, KeypointStrategy, RoiParams};
pub use tracking::{CommitEvent, GateMode, GateParams, GoalWindow, Tracker, TrackerParams};
