//! Synthetic RGB-D scenes with exact ground truth, standing in for the
//! detector and depth sensor, plus the two evaluation protocols.

mod experiment;
mod scenario;
mod synth;

pub use experiment::{
    cell_rng, run_experiment_a, run_experiment_b, AngularCell, ExperimentA, ExperimentB, FloorCell, RangeRow,
    StrategyStats, REFERENCE_GOAL_TABLE,
};
pub use scenario::{
    Aim, FloorSetup, FloorTarget, NoiseModel, PointingDirection, Pose, PositionGrid, Scenario, SubjectModel,
};
pub use synth::{render_pose, synthesize_frame, GroundTruth, PoseGeometry};
