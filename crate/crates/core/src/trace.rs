//! Per-trial record, serialized as JSON. Everything the evaluator and the
//! renderer need is in here; the scene file is not consulted again.

use serde::{Deserialize, Serialize};

use crate::baselines::{PivotConfig, PivotIteration, RrtConfig};
use crate::gridmap::{CellState, OccupancyGrid};
use crate::oracle::http::HttpOracleConfig;
use crate::oracle::{Exchange, GroundTruth, ScriptedOracleConfig};
use crate::optimizer::IterationTrace;
use crate::projection::{AffordanceContext, FanRegion};
use crate::rng::RngInfo;
use crate::scene::TrialSetup;
use crate::{Config, Grid, Point, Pose};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleDescriptor {
    Scripted(ScriptedOracleConfig),
    Http { url: String, model: String },
}

impl From<&HttpOracleConfig> for OracleDescriptor {
    fn from(c: &HttpOracleConfig) -> Self {
        OracleDescriptor::Http { url: c.url.clone(), model: c.model.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub planner: Config,
    pub rrt: RrtConfig,
    pub pivot: PivotConfig,
    pub oracle: OracleDescriptor,
}

/// World-aligned crop of the trial's occupancy grid, run-length encoded
/// row by row from the bottom (j = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point,
    /// (state, run length) with state 0 free, 1 occupied, 2 unknown.
    pub runs: Vec<(u8, u32)>,
}

fn code(s: CellState) -> u8 {
    match s {
        CellState::Free => 0,
        CellState::Occupied => 1,
        CellState::Unknown => 2,
    }
}

impl MapSnapshot {
    /// Crop `size`×`size` cells centred on `centre`. Cells outside the
    /// source grid are Unknown.
    pub fn crop(grid: &Grid, centre: Point, size: usize) -> Self {
        let res = grid.resolution;
        let half = size as f64 * res / 2.0;
        let (ci, cj) = grid.world_to_grid_raw(centre - Point::new(half, half));
        let origin = grid.origin + Point::new(ci as f64 * res, cj as f64 * res);
        let mut runs: Vec<(u8, u32)> = Vec::new();
        for j in 0..size as i64 {
            for i in 0..size as i64 {
                let (gi, gj) = (ci + i, cj + j);
                let s = if grid.in_bounds(gi, gj) { grid.get(crate::gridmap::Cell::new(gi as usize, gj as usize)) } else { CellState::Unknown };
                match runs.last_mut() {
                    Some((c, n)) if *c == code(s) => *n += 1,
                    _ => runs.push((code(s), 1)),
                }
            }
        }
        Self { width: size, height: size, resolution: res, origin, runs }
    }

    pub fn to_grid(&self) -> Grid {
        let mut g = OccupancyGrid::new(self.width, self.height, self.resolution, self.origin);
        let mut k = 0;
        for &(c, n) in &self.runs {
            let s = match c {
                0 => CellState::Free,
                1 => CellState::Occupied,
                _ => CellState::Unknown,
            };
            for _ in 0..n {
                if k < g.cells.len() {
                    g.cells[k] = s;
                }
                k += 1;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSummary {
    pub index: i32,
    pub bearing: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub footprint_cells: usize,
    pub centroid: Point,
    pub directions: Vec<DirectionSummary>,
    pub selected_index: Option<i32>,
    pub fan: Option<FanRegion>,
    pub keypoint: Option<Point>,
    pub proposals: Vec<Point>,
}

impl ContextSummary {
    pub fn new(ctx: &AffordanceContext, proposals: Vec<Point>) -> Self {
        Self {
            footprint_cells: ctx.footprint.len(),
            centroid: ctx.centroid,
            directions: ctx.directions.iter().map(|d| DirectionSummary { index: d.index, bearing: d.bearing, length: d.length }).collect(),
            selected_index: ctx.selected_index,
            fan: ctx.fan,
            keypoint: ctx.keypoint,
            proposals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Collision,
    Distance,
    Direction,
    /// The trial aborted before producing a placement.
    Skipped,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::Collision => "collision",
            FailureReason::Distance => "distance",
            FailureReason::Direction => "direction",
            FailureReason::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub reason: Option<FailureReason>,
}

impl Outcome {
    pub const SUCCESS: Outcome = Outcome { success: true, reason: None };

    pub fn failure(r: FailureReason) -> Self {
        Outcome { success: false, reason: Some(r) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Planning,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialError {
    pub kind: ErrorKind,
    pub message: String,
}

impl TrialError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        Self { kind: ErrorKind::Config, message: e.to_string() }
    }
    pub fn planning(e: impl std::fmt::Display) -> Self {
        Self { kind: ErrorKind::Planning, message: e.to_string() }
    }
    pub fn oracle(e: impl std::fmt::Display) -> Self {
        Self { kind: ErrorKind::Oracle, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub schema: u32,
    pub method: String,
    pub scene: String,
    pub task: String,
    pub instruction: String,
    pub direction_constrained: bool,
    pub base_seed: u64,
    pub trial_index: usize,
    pub seed: u64,
    pub rng: RngInfo,
    pub config: ConfigSnapshot,
    pub setup: Option<TrialSetup>,
    pub truth: Option<GroundTruth>,
    pub map: Option<MapSnapshot>,
    pub context: Option<ContextSummary>,
    pub iterations: Vec<IterationTrace>,
    pub pivot: Vec<PivotIteration>,
    pub path: Vec<Point>,
    pub path_cost: Option<f64>,
    pub placement: Option<Pose>,
    pub outcome: Outcome,
    pub error: Option<TrialError>,
    pub exchanges: Vec<Exchange>,
}

impl PlanTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip() {
        let mut g = Grid::new(30, 20, 0.1, Point::new(-1.0, 0.5));
        g.fill_rect(Point::new(0.0, 1.0), Point::new(0.5, 1.5), CellState::Occupied);
        let s = MapSnapshot::crop(&g, Point::new(0.5, 1.5), 40);
        let back = s.to_grid();
        assert_eq!(back.width, 40);
        for c in back.cells() {
            let p = back.grid_to_world(c);
            assert_eq!(back.get(c), g.state_at(p), "{c:?}");
        }
    }
}
