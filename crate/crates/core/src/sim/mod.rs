//! Planar worlds, beam sensing, closed-loop episodes and evaluation.

mod episode;
mod evaluate;
mod generate;
pub mod sensor;
mod trajectory;
pub mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use episode::{
    default_unicycle_stack, run_episode, step, Agent, AgentModel, DisturbanceConfig, EscapeConfig, PolicySource, Stack,
    StepDiagnostics,
};
pub use evaluate::{evaluate, format_table, EpisodeSpec, EvaluationReport, RateSummary, SeedGroup};
pub use generate::{generate_world, WorldKind};
pub use trajectory::{read_trajectory_csv, write_collisions_jsonl, write_trajectory_csv, TrajectoryRow};
pub use world::{Circle, Point, Pose2, Rect, World};

use crate::verification::CollisionRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("world generation failed: {0}")]
    Generation(String),
    #[error("invalid simulation stack: {0}")]
    InvalidStack(String),
    #[error("trajectory log {path}: {message}")]
    Log { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    /// Smallest barrier value over the episode; present iff the filter ran.
    pub min_h: Option<f64>,
    /// Control periods in which the filter changed the command.
    pub corrections: usize,
    pub fallbacks: usize,
    /// Control periods spent on a deadlock detour.
    pub detours: usize,
    /// Smallest distance from the agent centre to any obstacle surface, m.
    pub min_clearance: f64,
    pub path_length: f64,
    pub final_position: Point,
    /// Component failure that ended the episode early.
    pub error: Option<String>,
    pub collision: Option<CollisionRecord>,
    #[serde(skip)]
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

impl EpisodeResult {
    pub(crate) fn new(seed: u64, filtered: bool) -> Self {
        Self {
            seed,
            outcome: Outcome::Timeout,
            steps: 0,
            min_h: filtered.then_some(f64::INFINITY),
            corrections: 0,
            fallbacks: 0,
            detours: 0,
            min_clearance: f64::INFINITY,
            path_length: 0.0,
            final_position: [0.0, 0.0],
            error: None,
            collision: None,
            trajectory: None,
        }
    }
}
