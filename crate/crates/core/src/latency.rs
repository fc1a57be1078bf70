//! Per-frame latency measurement of the geometry pipeline on synthetic
//! frames. Detection is not part of the measured path.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::frame::{BoundingBox, DepthSample, DetectionFrame, Label, RoiPointSet};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::sim::cell_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyConfig {
    pub frames: usize,
    /// Total depth samples per frame across all regions.
    pub samples_per_frame: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self { frames: 1000, samples_per_frame: 5000, seed: 42, pipeline: PipelineConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencyReport {
    pub frames: usize,
    pub samples_per_frame: usize,
    pub strategy: String,
    pub tracking: bool,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub fps: f64,
    pub yield_rate: f64,
}

impl LatencyReport {
    pub fn summary(&self) -> String {
        format!(
            "frames {} samples/frame {} strategy {} tracking {}\np50 {:.3} ms  p99 {:.3} ms  max {:.3} ms  mean {:.3} ms\nthroughput {:.0} frames/s  yield {:.3}",
            self.frames,
            self.samples_per_frame,
            self.strategy,
            if self.tracking { "on" } else { "off" },
            self.p50_ms,
            self.p99_ms,
            self.max_ms,
            self.mean_ms,
            self.fps,
            self.yield_rate
        )
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn roi<R: Rng>(rng: &mut R, label: Label, cu: f64, cv: f64, half: f64, z: f64, n: usize) -> Result<RoiPointSet> {
    let bbox = BoundingBox::from_center(cu, cv, 2.0 * half, 2.0 * half, label, 0.9)?;
    let samples = (0..n)
        .map(|i| {
            let u = cu + half * (2.0 * rng.random::<f64>() - 1.0);
            let v = cv + half * (2.0 * rng.random::<f64>() - 1.0);
            // One in ten samples lands on the background.
            let depth = if i % 10 == 9 { z + 1.5 } else { z + 0.02 * rng.sample::<f64, _>(StandardNormal) };
            DepthSample::new(u, v, depth)
        })
        .collect();
    Ok(RoiPointSet::new(bbox, samples))
}

/// A face and two hands holding exactly `samples` depth samples in total.
pub fn synthetic_frame<R: Rng>(rng: &mut R, t: f64, samples: usize) -> Result<DetectionFrame> {
    let n_face = samples * 2 / 5;
    let n_hand = (samples - n_face) / 2;
    let n_idle = samples - n_face - n_hand;
    let du: [f64; 3] = std::array::from_fn(|_| 4.0 * rng.random::<f64>());
    let face = roi(rng, Label::Face, 320.0 + du[0], 130.0, 40.0, 2.0, n_face)?;
    let hand = roi(rng, Label::Hand, 380.0 + du[1], 200.0, 25.0, 1.7, n_hand)?;
    let idle = roi(rng, Label::Hand, 260.0 + du[2], 320.0, 25.0, 2.0, n_idle)?;
    Ok(DetectionFrame { timestamp: t, face: Some(face), hands: vec![hand, idle] })
}

/// Times `Pipeline::process` once per frame over pre-generated frames.
pub fn measure(config: &LatencyConfig, intr: &CameraIntrinsics) -> Result<LatencyReport> {
    if config.frames == 0 {
        return Err(Error::InvalidParameter("frames must be > 0".into()));
    }
    let mut rng = cell_rng(config.seed, 0);
    let frames = (0..config.frames)
        .map(|i| synthetic_frame(&mut rng, i as f64 / 30.0, config.samples_per_frame))
        .collect::<Result<Vec<_>>>()?;
    let mut pipeline = Pipeline::new(config.pipeline.clone(), *intr)?;

    let mut times = Vec::with_capacity(frames.len());
    let mut estimates = 0;
    let start = Instant::now();
    for frame in &frames {
        let t0 = Instant::now();
        let out = pipeline.process(frame);
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        estimates += usize::from(out.estimate.estimate.is_some());
    }
    let total = start.elapsed().as_secs_f64();
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    Ok(LatencyReport {
        frames: frames.len(),
        samples_per_frame: config.samples_per_frame,
        strategy: config.pipeline.strategy.to_string(),
        tracking: config.pipeline.tracking.is_some(),
        p50_ms: percentile(&times, 50.0),
        p99_ms: percentile(&times, 99.0),
        max_ms: times[times.len() - 1],
        mean_ms,
        fps: frames.len() as f64 / total.max(f64::MIN_POSITIVE),
        yield_rate: estimates as f64 / frames.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::KeypointStrategy;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[3.0], 0.0), 3.0);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn frame_has_exact_sample_count() {
        let mut rng = cell_rng(1, 0);
        for n in [0, 7, 5000] {
            let f = synthetic_frame(&mut rng, 0.0, n).unwrap();
            assert_eq!(f.sample_count(), n);
        }
    }

    #[test]
    fn synthetic_frames_yield_estimates() {
        let intr = CameraIntrinsics::default();
        for strategy in KeypointStrategy::ALL {
            let pipeline = PipelineConfig { strategy, ..PipelineConfig::default() };
            let cfg = LatencyConfig { frames: 20, samples_per_frame: 600, seed: 3, pipeline };
            let r = measure(&cfg, &intr).unwrap();
            assert_eq!(r.yield_rate, 1.0, "{strategy}");
            assert!(r.p50_ms <= r.p99_ms && r.p99_ms <= r.max_ms);
        }
    }

    #[test]
    fn empty_frames_are_processed() {
        let mut p = Pipeline::new(PipelineConfig::default(), CameraIntrinsics::default()).unwrap();
        let out = p.process(&DetectionFrame::empty(0.0));
        assert!(out.estimate.estimate.is_none() && out.commit.is_none());
        let cfg = LatencyConfig { frames: 5, samples_per_frame: 0, ..LatencyConfig::default() };
        assert_eq!(measure(&cfg, &CameraIntrinsics::default()).unwrap().yield_rate, 0.0);
    }
}
