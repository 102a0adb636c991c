//! Object footprint from a masked depth image, candidate approach
//! directions, direction voting, and the fan-shaped approach region.

pub mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{normalize_angle, Vec2};
use crate::gridmap::{Cell, CellState, FreeSet, OccupancyGrid};
use crate::oracle::{self, Attachment, Exchange, OptionItem, OracleError, OracleQuery, QueryKind, SemanticOracle};
use crate::scene::{CameraModel, Capture};
use crate::Point;

pub const NUM_DIRECTIONS: usize = 12;
pub const DIRECTION_STEP_DEG: f64 = 30.0;
pub const ARROW_LENGTH: f64 = 3.0;
pub const FAN_HALF_ANGLE: f64 = std::f64::consts::FRAC_PI_3;
/// Slack on the fan boundary so cells exactly at the half-angle stay in.
pub const ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("empty footprint: target not grounded")]
    EmptyFootprint,
    #[error("no direction majority")]
    NoMajority,
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

/// Union of map cells hit by the masked, finite-depth pixels.
pub fn backproject_mask(capture: &Capture, camera: &CameraModel, map: &OccupancyGrid<f64>) -> Vec<Cell> {
    assert_eq!(capture.depth.len(), capture.mask.len(), "depth and mask sizes differ");
    let mut cells = BTreeSet::new();
    for v in 0..capture.height {
        for u in 0..capture.width {
            let k = v * capture.width + u;
            if !capture.mask[k] || !capture.depth[k].is_finite() {
                continue;
            }
            let p = camera.backproject(u as f64, v as f64, capture.depth[k]);
            if let Ok(c) = map.world_to_grid(Vec2::new(p[0], p[1])) {
                cells.insert(c);
            }
        }
    }
    cells.into_iter().collect()
}

pub fn compute_centroid(footprint: &[Cell], map: &OccupancyGrid<f64>) -> Result<Point, ProjectionError> {
    if footprint.is_empty() {
        return Err(ProjectionError::EmptyFootprint);
    }
    let pts: Vec<Point> = footprint.iter().map(|c| map.grid_to_world(*c)).collect();
    Ok(crate::geom::mean(&pts).expect("non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    /// 1..=12.
    pub index: i32,
    pub bearing: f64,
    pub unit: Point,
    /// Arrow tip after clipping.
    pub end: Point,
    pub length: f64,
}

/// Twelve rays from `centroid` at 30° steps, index 1 along `phase`
/// (the robot heading). Each ray first leaves the blocked run it starts in
/// (the object itself), then stops at the first cell outside `free` or at
/// `arrow_length`.
pub fn generate_directions(centroid: Point, phase: f64, free: &FreeSet<f64>, arrow_length: f64) -> Vec<Direction> {
    let step = free.resolution * 0.25;
    (0..NUM_DIRECTIONS)
        .map(|k| {
            let bearing = normalize_angle(phase + (k as f64 * DIRECTION_STEP_DEG).to_radians());
            let unit = Vec2::from_angle(bearing);
            let mut left_start = false;
            let mut length = arrow_length;
            let n = (arrow_length / step).ceil() as usize;
            for s in 1..=n {
                let d = (s as f64 * step).min(arrow_length);
                let ok = free.contains(centroid + unit * d);
                if ok {
                    left_start = true;
                } else if left_start {
                    length = (d - step).max(0.0);
                    break;
                }
            }
            Direction { index: k as i32 + 1, bearing, unit, end: centroid + unit * length, length }
        })
        .collect()
}

/// Angular sector with its apex at the object centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanRegion {
    pub apex: Point,
    pub direction: f64,
    pub half_angle: f64,
}

impl FanRegion {
    pub fn contains(&self, p: Point) -> bool {
        in_fan(self.apex, Vec2::from_angle(self.direction), self.half_angle, p)
    }

    pub fn cells(&self, map: &OccupancyGrid<f64>) -> Vec<Cell> {
        build_fan(self.apex, Vec2::from_angle(self.direction), map, self.half_angle)
    }
}

pub fn in_fan(apex: Point, direction: Point, half_angle: f64, p: Point) -> bool {
    let v = p - apex;
    v.norm_sq() > 0.0 && v.angle_between(direction) <= half_angle + ANGLE_EPS
}

/// Every map cell whose centre bears within `half_angle` of `direction`.
pub fn build_fan(apex: Point, direction: Point, map: &OccupancyGrid<f64>, half_angle: f64) -> Vec<Cell> {
    map.cells().filter(|c| in_fan(apex, direction, half_angle, map.grid_to_world(*c))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceContext {
    pub footprint: Vec<Cell>,
    pub centroid: Point,
    pub directions: Vec<Direction>,
    pub selected_index: Option<i32>,
    pub fan: Option<FanRegion>,
    pub keypoint: Option<Point>,
}

impl AffordanceContext {
    pub fn new(footprint: Vec<Cell>, map: &OccupancyGrid<f64>, phase: f64, free: &FreeSet<f64>) -> Result<Self, ProjectionError> {
        let centroid = compute_centroid(&footprint, map)?;
        let directions = generate_directions(centroid, phase, free, ARROW_LENGTH);
        Ok(Self { footprint, centroid, directions, selected_index: None, fan: None, keypoint: None })
    }

    pub fn selected(&self) -> Option<&Direction> {
        let i = self.selected_index?;
        self.directions.iter().find(|d| d.index == i)
    }

    pub fn direction_options(&self) -> Vec<OptionItem> {
        self.directions.iter().map(|d| OptionItem { index: d.index, position: Some(d.end), bearing: Some(d.bearing) }).collect()
    }

    /// Record `index` as i* and build F_t around it.
    pub fn set_direction(&mut self, index: i32, half_angle: f64) {
        self.selected_index = Some(index);
        self.fan = self.selected().map(|d| FanRegion { apex: self.centroid, direction: d.bearing, half_angle });
    }
}

/// Ask three times and keep the strict majority.
pub fn select_direction(
    ctx: &AffordanceContext,
    oracle: &mut dyn SemanticOracle,
    instruction: &str,
    attachments: Vec<Attachment>,
    log: &mut Vec<Exchange>,
) -> Result<i32, ProjectionError> {
    let q = OracleQuery { kind: QueryKind::Direction, instruction: instruction.to_string(), attachments, options: ctx.direction_options(), want: 1 };
    let mut votes = [0i32; 3];
    for v in &mut votes {
        *v = oracle::ask(oracle, &q, log)?.indices[0];
    }
    oracle::majority_vote(votes).ok_or(ProjectionError::NoMajority)
}

/// Grid cells in `footprint` plus a one-cell ring, for containment checks.
pub fn dilate(cells: &[Cell], map: &OccupancyGrid<f64>) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for c in cells {
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (i, j) = (c.i as i64 + di, c.j as i64 + dj);
                if map.in_bounds(i, j) {
                    out.insert(Cell::new(i as usize, j as usize));
                }
            }
        }
    }
    out
}

/// Cells occupied by a box footprint.
pub fn footprint_cells(map: &OccupancyGrid<f64>, inside: impl Fn(Point) -> bool) -> Vec<Cell> {
    map.cells().filter(|c| map.get(*c) != CellState::Free && inside(map.grid_to_world(*c))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::compute_free_set;
    use crate::oracle::{OracleReply, NONE};
    use crate::scene::{camera::capture_boxes, Box3, RigidTransform};
    use proptest::prelude::*;

    fn open_map(n: usize) -> OccupancyGrid<f64> {
        OccupancyGrid::new(n, n, 0.05, Vec2::zero())
    }

    #[test]
    fn principal_point_pixel_backprojects() {
        let cam = CameraModel { fx: 100.0, fy: 100.0, cx: 2.0, cy: 1.0, width: 5, height: 3, extrinsic: RigidTransform::identity() };
        let mut depth = vec![f64::INFINITY; 15];
        let mut mask = vec![false; 15];
        depth[7] = 2.0;
        mask[7] = true;
        let cap = Capture { width: 5, height: 3, depth, mask };
        let p = cam.backproject(2.0, 1.0, 2.0);
        assert_eq!(p, [0.0, 0.0, 2.0]);
        let map = OccupancyGrid::new(10, 10, 0.05, Vec2::new(-0.25, -0.25));
        assert_eq!(backproject_mask(&cap, &cam, &map), vec![Cell::new(5, 5)]);
        let empty = Capture { mask: vec![false; 15], ..cap };
        assert!(backproject_mask(&empty, &cam, &map).is_empty());
    }

    #[test]
    fn capture_footprint_stays_on_the_box() {
        let map = open_map(100);
        let b = Box3 { center: [2.5, 2.5, 0.4], extents: [0.6, 0.4, 0.8], yaw: 0.3 };
        let cam = CameraModel {
            fx: 130.0, fy: 130.0, cx: 79.5, cy: 59.5, width: 160, height: 120,
            extrinsic: RigidTransform::look_at([1.3, 2.0, 1.3], b.center),
        };
        let cap = capture_boxes(&cam, &[b], 0);
        let cells = backproject_mask(&cap, &cam, &map);
        let truth = footprint_cells(&OccupancyGrid::filled(100, 100, 0.05, Vec2::zero(), CellState::Occupied), |p| b.footprint_contains(p));
        let ring = dilate(&truth, &map);
        let inside = cells.iter().filter(|c| ring.contains(c)).count();
        assert!(!cells.is_empty());
        assert!(inside as f64 >= 0.95 * cells.len() as f64, "{inside}/{}", cells.len());
    }

    #[test]
    fn centroid_examples() {
        let map = open_map(20);
        assert_eq!(compute_centroid(&[Cell::new(3, 4)], &map).unwrap(), map.grid_to_world(Cell::new(3, 4)));
        let c = compute_centroid(&[Cell::new(2, 2), Cell::new(4, 6)], &map).unwrap();
        assert!(c.dist(map.grid_to_world(Cell::new(3, 4))) < 1e-12);
        let cells = [(1, 2), (5, 5), (7, 0), (3, 3), (9, 1), (0, 8), (4, 4)].map(|(i, j)| Cell::new(i, j));
        let (mut sx, mut sy) = (0.0, 0.0);
        for c in &cells {
            sx += (c.i as f64 + 0.5) * 0.05;
            sy += (c.j as f64 + 0.5) * 0.05;
        }
        let c = compute_centroid(&cells, &map).unwrap();
        assert!((c.x - sx / 7.0).abs() < 1e-12 && (c.y - sy / 7.0).abs() < 1e-12);
        assert_eq!(compute_centroid(&[], &map), Err(ProjectionError::EmptyFootprint));
    }

    #[test]
    fn open_map_arrows_are_full_length() {
        let map = open_map(200);
        let free = compute_free_set(&map, 0.4);
        let dirs = generate_directions(Vec2::new(5.0, 5.0), 0.2, &free, ARROW_LENGTH);
        assert_eq!(dirs.len(), 12);
        for (k, d) in dirs.iter().enumerate() {
            assert_eq!(d.index, k as i32 + 1);
            assert_eq!(d.length, 3.0);
            let next = &dirs[(k + 1) % 12];
            assert!((normalize_angle(next.bearing - d.bearing) - 30f64.to_radians()).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_clips_east_arrow() {
        let mut map = open_map(200);
        map.fill_rect(Vec2::new(6.0, 0.0), Vec2::new(6.1, 10.0), CellState::Occupied);
        let free = compute_free_set(&map, 0.4);
        let dirs = generate_directions(Vec2::new(5.0, 5.0), 0.0, &free, ARROW_LENGTH);
        assert!(dirs[0].length < 1.0);
        assert_eq!(dirs[6].length, 3.0);
    }

    #[test]
    fn fan_threshold() {
        let apex = Vec2::new(1.0, 1.0);
        let dir = Vec2::from_angle(0.4);
        let at = |deg: f64| apex + Vec2::from_angle(0.4 + deg.to_radians()) * 0.8;
        assert!(in_fan(apex, dir, FAN_HALF_ANGLE, apex + dir));
        assert!(in_fan(apex, dir, FAN_HALF_ANGLE, at(59.0)));
        assert!(!in_fan(apex, dir, FAN_HALF_ANGLE, at(61.0)));
        assert!(in_fan(apex, dir, FAN_HALF_ANGLE, at(-60.0)));
        assert!(!in_fan(apex, dir, FAN_HALF_ANGLE, at(60.0 + 1e-6)));
    }

    #[test]
    fn fan_area_is_a_third() {
        let map = open_map(201);
        let apex = map.grid_to_world(Cell::new(100, 100));
        for r in [40usize, 60, 90] {
            let rr = r as f64 * 0.05;
            let within: Vec<Cell> = map.cells().filter(|c| { let d = map.grid_to_world(*c).dist(apex); d > 0.0 && d <= rr }).collect();
            let fan = build_fan(apex, Vec2::from_angle(0.7), &map, FAN_HALF_ANGLE);
            let fan_in = fan.iter().filter(|c| map.grid_to_world(**c).dist(apex) <= rr).count();
            let ratio = fan_in as f64 / within.len() as f64;
            assert!((3.0 * ratio - 1.0).abs() <= 0.03, "{ratio}");
        }
    }

    proptest! {
        #[test]
        fn fan_is_rotation_equivariant(ax in -2.0f64..2.0, ay in -2.0f64..2.0, d in -3.1f64..3.1, px in -3.0f64..3.0, py in -3.0f64..3.0, rot in -3.1f64..3.1) {
            let apex = Vec2::new(ax, ay);
            let p = Vec2::new(px, py);
            let dir = Vec2::from_angle(d);
            let a = in_fan(apex, dir, FAN_HALF_ANGLE, p);
            let v = p - apex;
            let ang = v.angle_between(dir);
            prop_assume!((ang - FAN_HALF_ANGLE).abs() > 1e-6);
            let b = in_fan(apex.rotate(rot), dir.rotate(rot), FAN_HALF_ANGLE, p.rotate(rot));
            prop_assert_eq!(a, b);
        }
    }

    struct Script(Vec<i32>, usize);
    impl SemanticOracle for Script {
        fn answer(&mut self, _: &OracleQuery) -> Result<OracleReply, OracleError> {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            Ok(OracleReply { indices: vec![v], raw: String::new() })
        }
    }

    fn ctx() -> AffordanceContext {
        let map = open_map(100);
        let free = compute_free_set(&map, 0.4);
        AffordanceContext::new(vec![Cell::new(50, 50)], &map, 0.0, &free).unwrap()
    }

    #[test]
    fn direction_vote_uses_three_queries() {
        let c = ctx();
        let mut log = Vec::new();
        let mut o = Script(vec![3, 3, NONE], 0);
        assert_eq!(select_direction(&c, &mut o, "x", vec![], &mut log), Ok(3));
        assert_eq!(o.1, 3);
        let mut o = Script(vec![1, 2, 3], 0);
        assert_eq!(select_direction(&c, &mut o, "x", vec![], &mut log), Err(ProjectionError::NoMajority));
        assert_eq!(o.1, 3);
        let mut o = Script(vec![NONE, NONE, 8], 0);
        assert_eq!(select_direction(&c, &mut o, "x", vec![], &mut log), Err(ProjectionError::NoMajority));
    }

    #[test]
    fn set_direction_builds_fan() {
        let mut c = ctx();
        c.set_direction(4, FAN_HALF_ANGLE);
        let f = c.fan.unwrap();
        assert!((f.direction - 90f64.to_radians()).abs() < 1e-12);
        assert!(f.contains(c.centroid + Vec2::new(0.0, 1.0)));
        assert!(!f.contains(c.centroid + Vec2::new(0.0, -1.0)));
    }
}
