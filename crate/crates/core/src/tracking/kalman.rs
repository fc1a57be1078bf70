//! Bank of constant-velocity Kalman filters over bounding boxes.
//!
//! State per track: `[u, v, w, h, du, dv]` (center, size, center velocity),
//! all in pixels and pixels/second. Size is a slow random walk; the center
//! follows a discrete white-noise-acceleration model.

use std::cmp::Ordering;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::frame::{BoundingBox, Label};

type State = SVector<f64, 6>;
type Cov = SMatrix<f64, 6, 6>;
type Meas = SVector<f64, 4>;
type MeasMatrix = SMatrix<f64, 4, 6>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Center acceleration noise, px/s^2.
    pub sigma_accel: f64,
    /// Measurement noise on center and size, px.
    pub sigma_meas: f64,
    /// Size random-walk noise, px/sqrt(s).
    pub sigma_size: f64,
    /// Prior velocity spread for new tracks, px/s.
    pub init_velocity_std: f64,
    /// Tracks are dropped once they go unmatched for more than this many frames.
    pub max_misses: u32,
    /// Image width, used by the association gate.
    pub image_width: u32,
    /// Fixed association gate in px; `None` uses [`gate_radius`].
    pub gate_px: Option<f64>,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            sigma_accel: 200.0,
            sigma_meas: 4.0,
            sigma_size: 10.0,
            init_velocity_std: 100.0,
            max_misses: 5,
            image_width: crate::camera::DEFAULT_WIDTH,
            gate_px: None,
        }
    }
}

/// Association gate: `0.5 * image_width * dt * 4`, clamped to [30, 150] px.
pub fn gate_radius(image_width: u32, dt: f64) -> f64 {
    (0.5 * f64::from(image_width) * dt * 4.0).clamp(30.0, 150.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: u64,
    pub label: Label,
    state: State,
    covariance: Cov,
    pub misses: u32,
}

impl Track {
    fn spawn(id: u64, bbox: &BoundingBox, params: &TrackerParams) -> Self {
        let (cu, cv) = bbox.center();
        let r = params.sigma_meas * params.sigma_meas;
        let vel = params.init_velocity_std * params.init_velocity_std;
        Self {
            id,
            label: bbox.label,
            state: State::from([cu, cv, bbox.width(), bbox.height(), 0.0, 0.0]),
            covariance: Cov::from_diagonal(&State::from([r, r, r, r, vel, vel])),
            misses: 0,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }

    pub fn size(&self) -> (f64, f64) {
        (self.state[2], self.state[3])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.state[4], self.state[5])
    }

    pub fn covariance(&self) -> &SMatrix<f64, 6, 6> {
        &self.covariance
    }

    fn predict(&mut self, dt: f64, params: &TrackerParams) {
        let mut f = Cov::identity();
        f[(0, 4)] = dt;
        f[(1, 5)] = dt;
        let qa = params.sigma_accel * params.sigma_accel;
        let qs = params.sigma_size * params.sigma_size * dt;
        let mut q = Cov::zeros();
        for (p, v) in [(0, 4), (1, 5)] {
            q[(p, p)] = qa * dt.powi(4) / 4.0;
            q[(p, v)] = qa * dt.powi(3) / 2.0;
            q[(v, p)] = q[(p, v)];
            q[(v, v)] = qa * dt * dt;
        }
        q[(2, 2)] = qs;
        q[(3, 3)] = qs;
        self.state = f * self.state;
        self.covariance = symmetrize(f * self.covariance * f.transpose() + q);
    }

    fn update(&mut self, bbox: &BoundingBox, params: &TrackerParams) {
        let (cu, cv) = bbox.center();
        let z = Meas::from([cu, cv, bbox.width(), bbox.height()]);
        let h = MeasMatrix::from_fn(|r, c| if r == c { 1.0 } else { 0.0 });
        let r = SMatrix::<f64, 4, 4>::identity() * (params.sigma_meas * params.sigma_meas);
        let s = h * self.covariance * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = self.covariance * h.transpose() * s_inv;
        self.state += k * (z - h * self.state);
        // Joseph form keeps the covariance symmetric positive semi-definite.
        let i_kh = Cov::identity() - k * h;
        self.covariance = symmetrize(i_kh * self.covariance * i_kh.transpose() + k * r * k.transpose());
        self.misses = 0;
    }

    fn bbox(&self, template: &BoundingBox) -> BoundingBox {
        let (cu, cv) = self.center();
        let w = self.state[2].max(1.0);
        let h = self.state[3].max(1.0);
        BoundingBox {
            u_min: cu - w / 2.0,
            v_min: cv - h / 2.0,
            u_max: cu + w / 2.0,
            v_max: cv + h / 2.0,
            label: template.label,
            confidence: template.confidence,
        }
    }
}

fn symmetrize(m: Cov) -> Cov {
    (m + m.transpose()) * 0.5
}

/// Posterior box for one input detection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedDetection {
    pub track_id: u64,
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, Default)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
}

fn canonical_cmp(a: &BoundingBox, b: &BoundingBox) -> Ordering {
    a.label
        .cmp(&b.label)
        .then(a.u_min.total_cmp(&b.u_min))
        .then(a.v_min.total_cmp(&b.v_min))
        .then(a.u_max.total_cmp(&b.u_max))
        .then(a.v_max.total_cmp(&b.v_max))
        .then(a.confidence.total_cmp(&b.confidence))
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Self { params, tracks: Vec::new(), next_id: 0 }
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advances every track by `dt` seconds and folds in this frame's
    /// detections. The returned vector is aligned with `detections`.
    ///
    /// Association is greedy nearest-neighbor on center distance within the
    /// gate, among tracks of the same label. Detections are put in a
    /// canonical order first, so the result does not depend on their order.
    pub fn step(&mut self, detections: &[BoundingBox], dt: f64) -> Vec<SmoothedDetection> {
        let dt = if dt > 0.0 && dt.is_finite() { dt } else { 1.0 / 30.0 };
        let params = self.params;
        for track in &mut self.tracks {
            track.predict(dt, &params);
        }
        let gate = params.gate_px.unwrap_or_else(|| gate_radius(params.image_width, dt));

        let mut order: Vec<usize> = (0..detections.len()).collect();
        order.sort_by(|&a, &b| canonical_cmp(&detections[a], &detections[b]).then(a.cmp(&b)));

        let mut candidates = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            let (tu, tv) = track.center();
            for (rank, &di) in order.iter().enumerate() {
                let det = &detections[di];
                if det.label != track.label {
                    continue;
                }
                let (du, dv) = det.center();
                let dist = (du - tu).hypot(dv - tv);
                if dist <= gate {
                    candidates.push((dist, track.id, rank, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_used = vec![false; self.tracks.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; detections.len()];
        for &(_, _, _, ti, di) in &candidates {
            if track_used[ti] || assigned[di].is_some() {
                continue;
            }
            track_used[ti] = true;
            assigned[di] = Some(ti);
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if !track_used[ti] {
                track.misses += 1;
            }
        }
        for (di, det) in detections.iter().enumerate() {
            if let Some(ti) = assigned[di] {
                self.tracks[ti].update(det, &params);
            }
        }

        let mut out: Vec<Option<SmoothedDetection>> = vec![None; detections.len()];
        for (di, det) in detections.iter().enumerate() {
            if let Some(ti) = assigned[di] {
                let t = &self.tracks[ti];
                out[di] = Some(SmoothedDetection { track_id: t.id, bbox: t.bbox(det) });
            }
        }
        self.tracks.retain(|t| t.misses <= params.max_misses);
        for &di in &order {
            if assigned[di].is_none() {
                let det = &detections[di];
                let track = Track::spawn(self.next_id, det, &params);
                self.next_id += 1;
                out[di] = Some(SmoothedDetection { track_id: track.id, bbox: track.bbox(det) });
                self.tracks.push(track);
            }
        }
        out.into_iter().map(|d| d.expect("every detection is matched or spawned")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    const DT: f64 = 1.0 / 30.0;

    fn det(cu: f64, cv: f64, label: Label) -> BoundingBox {
        BoundingBox::from_center(cu, cv, 40.0, 50.0, label, 0.9).unwrap()
    }

    fn assert_psd(track: &Track) {
        let c = track.covariance();
        assert!((c - c.transpose()).abs().max() < 1e-12);
        let eig = SymmetricEigen::new(*c);
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10), "{:?}", eig.eigenvalues);
    }

    /// Steady-state alpha/beta gains of the white-noise-acceleration model
    /// (Kalata's tracking index), independent of the filter recursion.
    fn kalata(sigma_a: f64, sigma_m: f64, dt: f64) -> (f64, f64) {
        let lambda = sigma_a * dt * dt / sigma_m;
        let r = (4.0 + lambda - (8.0 * lambda + lambda * lambda).sqrt()) / 4.0;
        let alpha = 1.0 - r * r;
        let beta = 2.0 * (2.0 - alpha) - 4.0 * (1.0 - alpha).sqrt();
        (alpha, beta)
    }

    #[test]
    fn stationary_detection_converges() {
        let mut tracker = Tracker::new(TrackerParams::default());
        let (tu, tv) = (200.0, 150.0);
        // first detection is off by 3 px, later ones wobble by +-1 px
        let mut last = None;
        for i in 0..50 {
            let off = if i == 0 {
                3.0
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let out = tracker.step(&[det(tu + off, tv - off, Label::Hand)], DT);
            if i >= 10 {
                let (cu, cv) = out[0].bbox.center();
                assert!((cu - tu).abs() < 0.5 && (cv - tv).abs() < 0.5, "frame {i}: {cu} {cv}");
            }
            assert_eq!(tracker.tracks().len(), 1);
            assert_psd(&tracker.tracks()[0]);
            last = Some(out[0].track_id);
        }
        assert_eq!(last, Some(0));
    }

    #[test]
    fn gain_matches_closed_form_steady_state() {
        let params = TrackerParams::default();
        let mut tracker = Tracker::new(params);
        for _ in 0..400 {
            tracker.step(&[det(300.0, 200.0, Label::Face)], DT);
        }
        let (alpha, beta) = kalata(params.sigma_accel, params.sigma_meas, DT);
        let r = params.sigma_meas * params.sigma_meas;
        let c = tracker.tracks()[0].covariance();
        // posterior P_uu = alpha R, P_u,du = (beta / dt) R at steady state
        assert!((c[(0, 0)] - alpha * r).abs() < 1e-9 * r, "{} vs {}", c[(0, 0)], alpha * r);
        assert!((c[(0, 4)] - beta / DT * r).abs() < 1e-6 * beta / DT * r);
        assert!((c[(1, 1)] - alpha * r).abs() < 1e-9 * r);
    }

    #[test]
    fn missing_track_dies_after_limit() {
        let params = TrackerParams::default();
        let mut tracker = Tracker::new(params);
        tracker.step(&[det(100.0, 100.0, Label::Hand)], DT);
        for _ in 0..params.max_misses {
            tracker.step(&[], DT);
            assert_eq!(tracker.tracks().len(), 1);
        }
        tracker.step(&[], DT);
        assert!(tracker.tracks().is_empty());
    }

    #[test]
    fn separated_detections_keep_ids() {
        let mut tracker = Tracker::new(TrackerParams::default());
        let mut ids = None;
        for i in 0..20 {
            let dx = i as f64;
            let out = tracker.step(&[det(100.0 + dx, 100.0, Label::Hand), det(500.0 - dx, 300.0, Label::Hand)], DT);
            let now = (out[0].track_id, out[1].track_id);
            if let Some(prev) = ids {
                assert_eq!(prev, now);
            }
            ids = Some(now);
        }
        assert_eq!(tracker.tracks().len(), 2);
        assert_ne!(ids.unwrap().0, ids.unwrap().1);
    }

    #[test]
    fn labels_never_cross() {
        let mut tracker = Tracker::new(TrackerParams::default());
        tracker.step(&[det(100.0, 100.0, Label::Face)], DT);
        let out = tracker.step(&[det(101.0, 100.0, Label::Hand)], DT);
        assert_eq!(out[0].track_id, 1);
        assert_eq!(tracker.tracks().len(), 2);
    }

    #[test]
    fn output_follows_input_permutation() {
        let frames: Vec<Vec<BoundingBox>> = (0..15)
            .map(|i| {
                let s = i as f64 * 2.0;
                vec![
                    det(100.0 + s, 100.0, Label::Hand),
                    det(130.0 + s, 110.0, Label::Hand),
                    det(300.0, 80.0 + s, Label::Face),
                ]
            })
            .collect();
        let mut a = Tracker::new(TrackerParams::default());
        let mut b = Tracker::new(TrackerParams::default());
        for dets in &frames {
            let out_a = a.step(dets, DT);
            let reversed: Vec<_> = dets.iter().rev().copied().collect();
            let mut out_b = b.step(&reversed, DT);
            out_b.reverse();
            assert_eq!(out_a, out_b);
        }
    }

    #[test]
    fn gate_rule() {
        assert!((gate_radius(640, DT) - 42.666_666_666_666_664).abs() < 1e-9);
        assert_eq!(gate_radius(640, 0.001), 30.0);
        assert_eq!(gate_radius(640, 1.0), 150.0);
    }

    #[test]
    fn far_jump_spawns_new_track() {
        let mut tracker = Tracker::new(TrackerParams::default());
        tracker.step(&[det(100.0, 100.0, Label::Hand)], DT);
        let out = tracker.step(&[det(400.0, 400.0, Label::Hand)], DT);
        assert_eq!(out[0].track_id, 1);
    }
}
