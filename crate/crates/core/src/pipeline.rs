//! Stateful per-stream processing: optional detection smoothing, the
//! per-frame estimate, and goal commitment.

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::frame::{BoundingBox, DetectionFrame, RoiPointSet};
use crate::pointing::{estimate_frame, FrameEstimate};
use crate::roi::{KeypointStrategy, RoiParams};
use crate::tracking::{CommitEvent, GateParams, GoalWindow, Tracker, TrackerParams};

/// Nominal frame interval used for the first frame of a stream.
const NOMINAL_DT: f64 = 1.0 / 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub strategy: KeypointStrategy,
    pub roi: RoiParams,
    /// `None` runs on raw detections.
    pub tracking: Option<TrackerParams>,
    pub gate: GateParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            strategy: KeypointStrategy::MeanDepth,
            roi: RoiParams::default(),
            tracking: None,
            gate: GateParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameOutput {
    pub estimate: FrameEstimate,
    pub commit: Option<CommitEvent>,
}

/// Frames must be fed in timestamp order.
#[derive(Clone, Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    intr: CameraIntrinsics,
    tracker: Option<Tracker>,
    window: GoalWindow,
    last_t: Option<f64>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, intr: CameraIntrinsics) -> Result<Self> {
        config.roi.validate()?;
        config.gate.validate()?;
        intr.validate()?;
        let tracker = config.tracking.map(|mut p| {
            p.image_width = intr.width;
            Tracker::new(p)
        });
        let window = GoalWindow::new(config.gate);
        Ok(Self { config, intr, tracker, window, last_t: None })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intr
    }

    pub fn process(&mut self, frame: &DetectionFrame) -> FrameOutput {
        let dt = self.last_t.map_or(NOMINAL_DT, |last| frame.timestamp - last);
        self.last_t = Some(frame.timestamp);

        let smoothed;
        let frame = match self.tracker.as_mut() {
            Some(tracker) => {
                smoothed = smooth(tracker, frame, dt);
                &smoothed
            }
            None => frame,
        };

        let estimate = estimate_frame(frame, self.config.strategy, &self.config.roi, &self.intr);
        let entry = match (estimate.goal, estimate.estimate) {
            (Some(goal), Some(e)) => Some((goal, e.pitch_deg, e.yaw_deg)),
            _ => None,
        };
        let commit = self.window.push(frame.timestamp, entry);
        FrameOutput { estimate, commit }
    }
}

fn smooth(tracker: &mut Tracker, frame: &DetectionFrame, dt: f64) -> DetectionFrame {
    let rois: Vec<&RoiPointSet> = frame.face.iter().chain(frame.hands.iter()).collect();
    let boxes: Vec<BoundingBox> = rois.iter().map(|r| r.source_bbox).collect();
    let out = tracker.step(&boxes, dt);
    let mut rebuilt = rois.iter().zip(&out).map(|(roi, s)| roi.with_bbox(s.bbox));
    let face = frame.face.as_ref().and_then(|_| rebuilt.next());
    DetectionFrame { timestamp: frame.timestamp, face, hands: rebuilt.collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{cell_rng, synthesize_frame, Aim, NoiseModel, Pose, Scenario};

    fn frames(n: usize, noise: NoiseModel) -> Vec<DetectionFrame> {
        let scn = Scenario { noise, ..Scenario::default() };
        let intr = CameraIntrinsics::default();
        let mut rng = cell_rng(11, 0);
        (0..n)
            .map(|i| {
                synthesize_frame(
                    &scn,
                    &Pose::new(2.5, 0.0),
                    &Aim::Target { x: 1.0, y: 2.0 },
                    &intr,
                    i as f64 / 30.0,
                    &mut rng,
                )
                .unwrap()
                .0
            })
            .collect()
    }

    #[test]
    fn steady_pointing_commits_once_per_window() {
        let mut p = Pipeline::new(PipelineConfig::default(), CameraIntrinsics::default()).unwrap();
        let commits: Vec<_> = frames(60, NoiseModel::noiseless()).iter().filter_map(|f| p.process(f).commit).collect();
        assert_eq!(commits.len(), 2);
        let [x, y] = commits[0].committed_goal;
        assert!((x - 1.0).abs() < 1e-9 && (y - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tracking_keeps_estimates_flowing() {
        let config = PipelineConfig { tracking: Some(TrackerParams::default()), ..PipelineConfig::default() };
        let mut tracked = Pipeline::new(config, CameraIntrinsics::default()).unwrap();
        let mut raw = Pipeline::new(PipelineConfig::default(), CameraIntrinsics::default()).unwrap();
        let fs = frames(60, NoiseModel::default());
        let yield_of = |p: &mut Pipeline| fs.iter().filter(|f| p.process(f).estimate.estimate.is_some()).count();
        assert_eq!(yield_of(&mut raw), 60);
        assert!(yield_of(&mut tracked) >= 55);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = PipelineConfig { roi: RoiParams { eps: 0.0, ..RoiParams::default() }, ..PipelineConfig::default() };
        assert!(Pipeline::new(bad, CameraIntrinsics::default()).is_err());
    }
}
