//! Comparison methods: object-centre and affordance-point placement via a
//! path planner, and iterative visual prompting (PIVOT).

mod astar;
mod pivot;
mod rrt;

pub use astar::{astar, astar_plan, dijkstra, octile, GridPath, StepCost};
pub use pivot::{pivot_place, PivotConfig, PivotIteration, PivotVariant};
pub use rrt::{rrt_star_plan, RrtConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::FreeSet;
use crate::oracle::OracleError;
use crate::rng::Rng;
use crate::{Point, Pose};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("start {0:?} is outside the free set")]
    StartBlocked(Point),
    #[error("no free cell satisfies the goal band")]
    NoGoal,
    #[error("goal band unreachable from the start")]
    Unreachable,
    #[error("no feasible sample after {0} draws")]
    NoFeasibleSample(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    Astar,
    RrtStar,
}

/// Reach a pose at `radius` ± `tolerance` from `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPlanQuery {
    pub start: Pose,
    pub target: Point,
    pub radius: f64,
    pub tolerance: f64,
}

impl PathPlanQuery {
    pub fn in_band(&self, p: Point) -> bool {
        (p.dist(self.target) - self.radius).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub placement: Pose,
    pub path: Vec<Point>,
    /// Path length in meters.
    pub cost: f64,
}

/// Plan to the band around `q.target` with the chosen planner.
pub fn plan(planner: Planner, q: &PathPlanQuery, free: &FreeSet<f64>, rrt: &RrtConfig, rng: &mut Rng) -> Result<PlanOutcome, PlanError> {
    match planner {
        Planner::Astar => astar_plan(q, free),
        Planner::RrtStar => rrt_star_plan(q, free, rrt, rng),
    }
}

/// Drive to the preferred radius around the footprint centroid.
pub fn place_object_center(planner: Planner, start: Pose, centroid: Point, radius: f64, free: &FreeSet<f64>, rrt: &RrtConfig, rng: &mut Rng) -> Result<PlanOutcome, PlanError> {
    let q = PathPlanQuery { start, target: centroid, radius, tolerance: free.resolution };
    plan(planner, &q, free, rrt, rng)
}

/// Drive to the preferred radius around the selected affordance point.
pub fn place_affordance_point(planner: Planner, start: Pose, g: Point, radius: f64, free: &FreeSet<f64>, rrt: &RrtConfig, rng: &mut Rng) -> Result<PlanOutcome, PlanError> {
    let q = PathPlanQuery { start, target: g, radius, tolerance: free.resolution };
    plan(planner, &q, free, rrt, rng)
}
