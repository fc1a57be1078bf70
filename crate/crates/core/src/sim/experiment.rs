//! Angular-accuracy grid and floor-target runs over simulated scenes.
//!
//! Each grid cell owns an RNG derived from `(seed, cell index)`, so cells can
//! run in any order or in parallel and still produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::error::Result;
use crate::pointing::{angle_between_deg, angle_difference_deg, estimate_frame};
use crate::roi::{KeypointStrategy, RoiParams};

use super::scenario::{Aim, FloorTarget, Pose, Scenario};
use super::synth::synthesize_frame;

/// Goal-error table measured on real hardware: (distance m, mu cm, sigma cm).
pub const REFERENCE_GOAL_TABLE: [(f64, f64, f64); 5] =
    [(1.5, 16.1, 1.9), (2.5, 18.1, 2.1), (3.5, 14.5, 3.5), (4.5, 22.4, 5.6), (5.5, 48.4, 12.3)];

/// Stream offset separating floor-target cells from grid cells.
const FLOOR_STREAM_BASE: u64 = 1 << 32;

pub fn cell_rng(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    rng
}

fn map_cells<T: Send, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Per-strategy results for one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyStats {
    pub strategy: KeypointStrategy,
    /// Angle between estimated and true pointing rays, per frame;
    /// `None` where the frame produced no estimate.
    pub angle_errors: Vec<Option<f64>>,
    pub pitch_errors: Vec<f64>,
    pub yaw_errors: Vec<f64>,
    /// Floor-goal error in meters for frames where both truth and estimate hit the floor.
    pub goal_errors: Vec<f64>,
    /// Frames whose true ray hits the floor but whose estimate does not.
    pub missed_goals: usize,
}

impl StrategyStats {
    fn new(strategy: KeypointStrategy, frames: usize) -> Self {
        Self {
            strategy,
            angle_errors: Vec::with_capacity(frames),
            pitch_errors: Vec::new(),
            yaw_errors: Vec::new(),
            goal_errors: Vec::new(),
            missed_goals: 0,
        }
    }

    pub fn frames(&self) -> usize {
        self.angle_errors.len()
    }

    pub fn estimates(&self) -> usize {
        self.angle_errors.iter().flatten().count()
    }

    pub fn yield_rate(&self) -> f64 {
        if self.frames() == 0 {
            0.0
        } else {
            self.estimates() as f64 / self.frames() as f64
        }
    }

    /// Mean angular error over frames with an estimate (NaN if none).
    pub fn mean_error_deg(&self) -> f64 {
        mean(self.angle_errors.iter().flatten().copied())
    }

    pub fn mean_pitch_error_deg(&self) -> f64 {
        mean(self.pitch_errors.iter().copied())
    }

    pub fn mean_yaw_error_deg(&self) -> f64 {
        mean(self.yaw_errors.iter().copied())
    }

    pub fn mean_goal_error_m(&self) -> f64 {
        mean(self.goal_errors.iter().copied())
    }

    pub fn max_goal_error_m(&self) -> f64 {
        self.goal_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_error_deg(&self) -> f64 {
        self.angle_errors.iter().flatten().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngularCell {
    pub pose: Pose,
    pub direction: String,
    pub stats: Vec<StrategyStats>,
}

impl AngularCell {
    pub fn stats_for(&self, strategy: KeypointStrategy) -> Option<&StrategyStats> {
        self.stats.iter().find(|s| s.strategy == strategy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentA {
    pub strategies: Vec<KeypointStrategy>,
    pub cells: Vec<AngularCell>,
}

impl ExperimentA {
    /// Stats for every cell whose range satisfies `in_band`.
    pub fn stats_where<'a>(
        &'a self,
        strategy: KeypointStrategy,
        in_band: impl Fn(f64) -> bool + 'a,
    ) -> impl Iterator<Item = &'a StrategyStats> + 'a {
        self.cells.iter().filter(move |c| in_band(c.pose.range)).filter_map(move |c| c.stats_for(strategy))
    }

    /// Mean angular error over all estimates in cells at the given range.
    pub fn mean_error_at(&self, strategy: KeypointStrategy, range: f64) -> f64 {
        mean(
            self.stats_where(strategy, move |r| (r - range).abs() < 1e-9)
                .flat_map(|s| s.angle_errors.iter().flatten().copied()),
        )
    }

    /// Fraction of frames yielding an estimate across cells in the band.
    pub fn yield_where(&self, strategy: KeypointStrategy, in_band: impl Fn(f64) -> bool) -> f64 {
        let (est, frames) =
            self.stats_where(strategy, in_band).fold((0, 0), |(e, f), s| (e + s.estimates(), f + s.frames()));
        if frames == 0 {
            0.0
        } else {
            est as f64 / frames as f64
        }
    }

    /// Mean error per (range, bearing) over all directions, for heatmaps.
    pub fn position_means(&self, strategy: KeypointStrategy) -> Vec<(Pose, f64)> {
        let mut out: Vec<(Pose, Vec<f64>)> = Vec::new();
        for cell in &self.cells {
            let Some(stats) = cell.stats_for(strategy) else { continue };
            let errs = stats.angle_errors.iter().flatten().copied();
            match out.iter_mut().find(|(p, _)| *p == cell.pose) {
                Some((_, v)) => v.extend(errs),
                None => out.push((cell.pose, errs.collect())),
            }
        }
        out.into_iter().map(|(p, v)| (p, mean(v.into_iter()))).collect()
    }
}

/// Runs every (position, direction) cell of the grid, `frames_per_pose`
/// frames each, scoring every strategy on the same frames.
pub fn run_experiment_a(
    scn: &Scenario,
    intr: &CameraIntrinsics,
    strategies: &[KeypointStrategy],
    params: &RoiParams,
    parallel: bool,
) -> Result<ExperimentA> {
    scn.validate(intr)?;
    params.validate()?;
    let poses = scn.grid.poses();
    let n_dirs = scn.directions.len();
    let cells = map_cells(poses.len() * n_dirs, parallel, |idx| {
        let pose = poses[idx / n_dirs];
        let direction = &scn.directions[idx % n_dirs];
        let aim = Aim::from(direction);
        let mut rng = cell_rng(scn.seed, idx as u64);
        let mut stats: Vec<StrategyStats> =
            strategies.iter().map(|&s| StrategyStats::new(s, scn.frames_per_pose)).collect();
        for f in 0..scn.frames_per_pose {
            let t = f as f64 / scn.frame_rate;
            let (frame, truth) = synthesize_frame(scn, &pose, &aim, intr, t, &mut rng)?;
            for st in &mut stats {
                let out = estimate_frame(&frame, st.strategy, params, intr);
                match out.estimate {
                    Some(est) => {
                        st.angle_errors.push(Some(angle_between_deg(&est.ray(), &truth.ray())));
                        st.pitch_errors.push((est.pitch_deg - truth.pitch_deg).abs());
                        st.yaw_errors.push(angle_difference_deg(est.yaw_deg, truth.yaw_deg));
                    }
                    None => st.angle_errors.push(None),
                }
                if let Some(goal) = truth.floor_goal {
                    match out.goal {
                        Some(g) => st.goal_errors.push(g.distance(&goal)),
                        None => st.missed_goals += 1,
                    }
                }
            }
        }
        Ok(AngularCell { pose, direction: direction.name.clone(), stats })
    })?;
    Ok(ExperimentA { strategies: strategies.to_vec(), cells })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloorCell {
    pub pose: Pose,
    pub target: FloorTarget,
    pub frames: usize,
    /// Distance between estimated goal and target, meters, per frame with a goal.
    pub errors: Vec<f64>,
}

impl FloorCell {
    pub fn mean_error_m(&self) -> f64 {
        mean(self.errors.iter().copied())
    }
}

/// One row of the goal-error table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeRow {
    pub distance: f64,
    pub mu_cm: f64,
    pub sigma_cm: f64,
    pub frames: usize,
    pub goals: usize,
    /// Hardware measurement at the same distance, if one exists.
    pub reference: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentB {
    pub strategy: KeypointStrategy,
    pub cells: Vec<FloorCell>,
    pub rows: Vec<RangeRow>,
}

impl ExperimentB {
    pub fn row_at(&self, distance: f64) -> Option<&RangeRow> {
        self.rows.iter().find(|r| (r.distance - distance).abs() < 1e-9)
    }
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Stands the subject at each floor-setup distance, points at each target
/// and scores the per-frame floor goal against the target.
pub fn run_experiment_b(
    scn: &Scenario,
    intr: &CameraIntrinsics,
    strategy: KeypointStrategy,
    params: &RoiParams,
    parallel: bool,
) -> Result<ExperimentB> {
    scn.validate(intr)?;
    params.validate()?;
    let poses = scn.floor.poses();
    let targets = &scn.floor.targets;
    let n_targets = targets.len();
    let cells = map_cells(poses.len() * n_targets, parallel, |idx| {
        let pose = poses[idx / n_targets];
        let target = &targets[idx % n_targets];
        let aim = Aim::from(target);
        let mut rng = cell_rng(scn.seed, FLOOR_STREAM_BASE + idx as u64);
        let mut errors = Vec::with_capacity(scn.frames_per_pose);
        for f in 0..scn.frames_per_pose {
            let t = f as f64 / scn.frame_rate;
            let (frame, _) = synthesize_frame(scn, &pose, &aim, intr, t, &mut rng)?;
            if let Some(g) = estimate_frame(&frame, strategy, params, intr).goal {
                errors.push(g.distance(&crate::pointing::GoalPoint::new(target.x, target.y)));
            }
        }
        Ok(FloorCell { pose, target: target.clone(), frames: scn.frames_per_pose, errors })
    })?;

    let rows = poses
        .iter()
        .map(|pose| {
            let at: Vec<&FloorCell> = cells.iter().filter(|c| c.pose == *pose).collect();
            let errors: Vec<f64> = at.iter().flat_map(|c| c.errors.iter().copied()).collect();
            RangeRow {
                distance: pose.range,
                mu_cm: 100.0 * mean(errors.iter().copied()),
                sigma_cm: 100.0 * sample_std(&errors),
                frames: at.iter().map(|c| c.frames).sum(),
                goals: errors.len(),
                reference: REFERENCE_GOAL_TABLE
                    .iter()
                    .find(|(d, _, _)| (d - pose.range).abs() < 1e-9)
                    .map(|&(_, m, s)| (m, s)),
            }
        })
        .collect();
    Ok(ExperimentB { strategy, cells, rows })
}
