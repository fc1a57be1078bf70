//! Goal commitment over a sliding window of per-frame floor goals.
//!
//! A goal is committed once the window holds `window` goals, none older than
//! `max_age` seconds, and their spread (trace of the sample covariance) is
//! below the threshold. The window is cleared after each commitment.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointing::GoalPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    /// Trace of the (x, y) goal covariance, m^2.
    Goal,
    /// Trace of the (pitch, yaw) covariance, deg^2.
    Direction,
}

impl std::str::FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goal" => Ok(GateMode::Goal),
            "direction" => Ok(GateMode::Direction),
            other => Err(Error::InvalidParameter(format!("unknown gate mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub window: usize,
    /// Entries older than this (seconds, relative to the newest frame) are evicted.
    pub max_age: f64,
    /// Goal-mode threshold on the covariance trace, m^2.
    pub tau: f64,
    /// Direction-mode threshold on the covariance trace, deg^2.
    pub tau_angle: f64,
    pub mode: GateMode,
}

impl Default for GateParams {
    fn default() -> Self {
        Self { window: 30, max_age: 1.0, tau: 0.01, tau_angle: 4.0, mode: GateMode::Goal }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("gate window must be >= 1".into()));
        }
        if !(self.max_age > 0.0) {
            return Err(Error::InvalidParameter(format!("gate max_age must be > 0 (got {})", self.max_age)));
        }
        if !(self.tau > 0.0) || !(self.tau_angle > 0.0) {
            return Err(Error::InvalidParameter("gate thresholds must be > 0".into()));
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        match self.mode {
            GateMode::Goal => self.tau,
            GateMode::Direction => self.tau_angle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowEntry {
    pub t: f64,
    pub goal: GoalPoint,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

/// Emitted as `{t, committed_goal:[x,y], cov_trace}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitEvent {
    pub t: f64,
    pub committed_goal: [f64; 2],
    pub cov_trace: f64,
}

#[derive(Clone, Debug)]
pub struct GoalWindow {
    params: GateParams,
    entries: VecDeque<WindowEntry>,
}

impl GoalWindow {
    pub fn new(params: GateParams) -> Self {
        Self { params, entries: VecDeque::with_capacity(params.window) }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &WindowEntry> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Trace of the sample covariance of the buffered goals (or angles, in
    /// direction mode). Zero for fewer than two entries.
    pub fn covariance_trace(&self) -> f64 {
        match self.params.mode {
            GateMode::Goal => trace2(self.entries.iter().map(|e| (e.goal.x, e.goal.y)), self.entries.len()),
            GateMode::Direction => {
                let Some(first) = self.entries.front() else {
                    return 0.0;
                };
                let y0 = first.yaw_deg;
                // unwrap yaw around the first entry
                let unwrapped = self.entries.iter().map(|e| {
                    let d = (e.yaw_deg - y0 + 180.0).rem_euclid(360.0) - 180.0;
                    (e.pitch_deg, y0 + d)
                });
                trace2(unwrapped, self.entries.len())
            }
        }
    }

    pub fn mean_goal(&self) -> Option<GoalPoint> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len() as f64;
        let (sx, sy) = self.entries.iter().fold((0.0, 0.0), |(sx, sy), e| (sx + e.goal.x, sy + e.goal.y));
        Some(GoalPoint::new(sx / n, sy / n))
    }

    /// Feeds one frame. `goal` carries the frame's floor goal and pointing
    /// angles when it produced one. Returns the committed goal, if any.
    pub fn push(&mut self, t: f64, goal: Option<(GoalPoint, f64, f64)>) -> Option<CommitEvent> {
        while let Some(front) = self.entries.front() {
            if t - front.t > self.params.max_age {
                self.entries.pop_front();
            } else {
                break;
            }
        }
        let (goal, pitch_deg, yaw_deg) = goal?;
        if self.entries.len() == self.params.window {
            self.entries.pop_front();
        }
        self.entries.push_back(WindowEntry { t, goal, pitch_deg, yaw_deg });
        if self.entries.len() < self.params.window {
            return None;
        }
        let trace = self.covariance_trace();
        if trace < self.params.threshold() {
            let mean = self.mean_goal().expect("window is full");
            self.entries.clear();
            Some(CommitEvent { t, committed_goal: [mean.x, mean.y], cov_trace: trace })
        } else {
            None
        }
    }
}

fn trace2(values: impl Iterator<Item = (f64, f64)> + Clone, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let (sa, sb) = values.clone().fold((0.0, 0.0), |(sa, sb), (a, b)| (sa + a, sb + b));
    let (ma, mb) = (sa / nf, sb / nf);
    let ss = values.fold(0.0, |acc, (a, b)| acc + (a - ma).powi(2) + (b - mb).powi(2));
    ss / (nf - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 30.0;

    fn feed(window: &mut GoalWindow, goals: &[GoalPoint]) -> Vec<CommitEvent> {
        goals.iter().enumerate().filter_map(|(i, g)| window.push(i as f64 * DT, Some((*g, 30.0, 0.0)))).collect()
    }

    #[test]
    fn thirty_identical_goals_commit() {
        let mut w = GoalWindow::new(GateParams::default());
        let commits = feed(&mut w, &[GoalPoint::new(1.0, 2.0); 30]);
        assert_eq!(commits.len(), 1);
        assert_eq!(commits[0].committed_goal, [1.0, 2.0]);
        assert_eq!(commits[0].cov_trace, 0.0);
        assert!(w.is_empty());
    }

    #[test]
    fn twenty_nine_never_commit() {
        let mut w = GoalWindow::new(GateParams::default());
        assert!(feed(&mut w, &[GoalPoint::new(1.0, 2.0); 29]).is_empty());
        assert_eq!(w.len(), 29);
    }

    #[test]
    fn alternating_spread_never_commits() {
        let mut w = GoalWindow::new(GateParams::default());
        let goals: Vec<_> = (0..90).map(|i| GoalPoint::new(if i % 2 == 0 { 0.5 } else { -0.5 }, 2.0)).collect();
        assert!(feed(&mut w, &goals).is_empty());
        assert!((w.covariance_trace() - 0.25 * 30.0 / 29.0).abs() < 1e-12);
    }

    #[test]
    fn stale_entries_are_evicted() {
        let mut w = GoalWindow::new(GateParams::default());
        for i in 0..20 {
            assert!(w.push(i as f64 * DT, Some((GoalPoint::new(0.0, 0.0), 0.0, 0.0))).is_none());
        }
        // a gap longer than a second empties the window
        assert!(w.push(5.0, None).is_none());
        assert!(w.is_empty());
        // 30 goals spread over 2 s never fill the window
        let slow: Vec<_> = (0..30).map(|i| 10.0 + i as f64 * 0.07).collect();
        for t in slow {
            assert!(w.push(t, Some((GoalPoint::new(0.0, 0.0), 0.0, 0.0))).is_none());
        }
        assert!(w.len() < 30);
    }

    #[test]
    fn frames_without_goal_do_not_fill() {
        let mut w = GoalWindow::new(GateParams::default());
        for i in 0..60 {
            let goal = (i % 2 == 0).then_some((GoalPoint::new(1.0, 1.0), 0.0, 0.0));
            assert!(w.push(i as f64 * DT, goal).is_none());
        }
    }

    #[test]
    fn direction_mode_uses_angles() {
        let params = GateParams { mode: GateMode::Direction, ..GateParams::default() };
        let mut w = GoalWindow::new(params);
        // goals scattered widely but angles steady across the yaw seam
        let mut commit = None;
        for i in 0..30 {
            let yaw = if i % 2 == 0 { 179.5 } else { -179.5 };
            let goal = GoalPoint::new(i as f64, 0.0);
            commit = commit.or(w.push(i as f64 * DT, Some((goal, 20.0, yaw))));
        }
        let c = commit.expect("tight angles commit");
        assert!(c.cov_trace < 4.0);
        let mut w = GoalWindow::new(params);
        let mut any = false;
        for i in 0..30 {
            let pitch = if i % 2 == 0 { 15.0 } else { 25.0 };
            any |= w.push(i as f64 * DT, Some((GoalPoint::new(0.0, 0.0), pitch, 0.0))).is_some();
        }
        assert!(!any);
    }

    #[test]
    fn threshold_is_strict() {
        // trace exactly at tau does not commit
        let params = GateParams { window: 2, tau: 0.5, ..GateParams::default() };
        let mut w = GoalWindow::new(params);
        w.push(0.0, Some((GoalPoint::new(0.0, 0.0), 0.0, 0.0)));
        // two points 1 m apart: sample variance 0.5
        assert!(w.push(0.01, Some((GoalPoint::new(1.0, 0.0), 0.0, 0.0))).is_none());
    }

    #[test]
    fn params_validation() {
        assert!(GateParams::default().validate().is_ok());
        assert!(GateParams { window: 0, ..GateParams::default() }.validate().is_err());
        assert!(GateParams { tau: 0.0, ..GateParams::default() }.validate().is_err());
    }
}
