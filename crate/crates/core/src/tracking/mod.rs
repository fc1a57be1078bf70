//! Frame-to-frame smoothing of detections and the windowed goal commitment.

mod gate;
mod kalman;

pub use gate::{CommitEvent, GateMode, GateParams, GoalWindow, WindowEntry};
pub use kalman::{gate_radius, SmoothedDetection, Track, Tracker, TrackerParams};
