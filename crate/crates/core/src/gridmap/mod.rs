//! 2D occupancy grids, clearance, and egocentric crops.
//!
//! Cell `(i, j)` covers `[origin + i·res, origin + (i+1)·res)` along x and the
//! same along y; `j` grows with world +y.

mod edt;
pub mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Pose2D, Vec2};
use crate::scalar::Real;

pub use edt::{distance_transform, distance_transform_where, DistanceMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    /// Anything that is not known to be free.
    #[inline]
    pub fn blocks(self) -> bool {
        self != CellState::Free
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("point maps to cell ({i}, {j}) outside a {width}x{height} grid")]
pub struct OutOfRange {
    pub i: i64,
    pub j: i64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct OccupancyGrid<T: Real> {
    pub width: usize,
    pub height: usize,
    pub resolution: T,
    pub origin: Vec2<T>,
    pub cells: Vec<CellState>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn new(width: usize, height: usize, resolution: T, origin: Vec2<T>) -> Self {
        Self::filled(width, height, resolution, origin, CellState::Free)
    }

    pub fn filled(width: usize, height: usize, resolution: T, origin: Vec2<T>, state: CellState) -> Self {
        assert!(resolution > T::zero(), "grid resolution must be positive");
        Self { width, height, resolution, origin, cells: vec![state; width * height] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.j * self.width + c.i
    }

    #[inline]
    pub fn cell_of_index(&self, k: usize) -> Cell {
        Cell::new(k % self.width, k / self.width)
    }

    #[inline]
    pub fn get(&self, c: Cell) -> CellState {
        self.cells[self.index(c)]
    }

    #[inline]
    pub fn set(&mut self, c: Cell, s: CellState) {
        let k = self.index(c);
        self.cells[k] = s;
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    /// Signed cell coordinates of a point, without bounds checking.
    pub fn world_to_grid_raw(&self, p: Vec2<T>) -> (i64, i64) {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        (
            fx.to_i64().unwrap_or(i64::MIN),
            fy.to_i64().unwrap_or(i64::MIN),
        )
    }

    pub fn world_to_grid(&self, p: Vec2<T>) -> Result<Cell, OutOfRange> {
        let (i, j) = self.world_to_grid_raw(p);
        if self.in_bounds(i, j) {
            Ok(Cell::new(i as usize, j as usize))
        } else {
            Err(OutOfRange { i, j, width: self.width, height: self.height })
        }
    }

    /// World coordinates of a cell's center.
    pub fn grid_to_world(&self, c: Cell) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new(
            self.origin.x + (T::from_usize_lossy(c.i) + half) * self.resolution,
            self.origin.y + (T::from_usize_lossy(c.j) + half) * self.resolution,
        )
    }

    /// State at a world point; outside the map reads as Unknown.
    pub fn state_at(&self, p: Vec2<T>) -> CellState {
        match self.world_to_grid(p) {
            Ok(c) => self.get(c),
            Err(_) => CellState::Unknown,
        }
    }

    pub fn size_m(&self) -> Vec2<T> {
        Vec2::new(
            T::from_usize_lossy(self.width) * self.resolution,
            T::from_usize_lossy(self.height) * self.resolution,
        )
    }

    pub fn max_corner(&self) -> Vec2<T> {
        self.origin + self.size_m()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |j| (0..self.width).map(move |i| Cell::new(i, j)))
    }

    /// Mark every cell whose center lies in the axis-aligned rectangle.
    pub fn fill_rect(&mut self, min: Vec2<T>, max: Vec2<T>, state: CellState) {
        self.fill_where(state, |p| p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y);
    }

    /// Mark every cell whose center satisfies `inside`.
    pub fn fill_where(&mut self, state: CellState, inside: impl Fn(Vec2<T>) -> bool) {
        for k in 0..self.cells.len() {
            let c = self.cell_of_index(k);
            if inside(self.grid_to_world(c)) {
                self.cells[k] = state;
            }
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    pub fn cast<U: Real>(&self) -> OccupancyGrid<U> {
        OccupancyGrid {
            width: self.width,
            height: self.height,
            resolution: U::lit(self.resolution.to_f64_lossy()),
            origin: self.origin.cast(),
            cells: self.cells.clone(),
        }
    }
}

/// Cells that are Free and at least `clearance` from every non-free cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSet<T: Real> {
    pub mask: Vec<bool>,
    pub clearance: T,
    pub width: usize,
    pub height: usize,
    pub resolution: T,
    pub origin: Vec2<T>,
}

impl<T: Real> FreeSet<T> {
    #[inline]
    pub fn contains_cell(&self, c: Cell) -> bool {
        self.mask[c.j * self.width + c.i]
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        match (fx.to_i64(), fy.to_i64()) {
            (Some(i), Some(j)) if i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height => {
                self.mask[j as usize * self.width + i as usize]
            }
            _ => false,
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn cell_center(&self, c: Cell) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new(
            self.origin.x + (T::from_usize_lossy(c.i) + half) * self.resolution,
            self.origin.y + (T::from_usize_lossy(c.j) + half) * self.resolution,
        )
    }

    pub fn area(&self) -> T {
        T::from_usize_lossy(self.count()) * self.resolution * self.resolution
    }

    pub fn bounds(&self) -> (Vec2<T>, Vec2<T>) {
        let max = self.origin
            + Vec2::new(
                T::from_usize_lossy(self.width) * self.resolution,
                T::from_usize_lossy(self.height) * self.resolution,
            );
        (self.origin, max)
    }
}

pub fn compute_free_set<T: Real>(grid: &OccupancyGrid<T>, clearance: T) -> FreeSet<T> {
    assert!(clearance >= T::zero(), "clearance must be non-negative");
    let dist = distance_transform_where(grid, |s| s.blocks());
    let mask = grid
        .cells
        .iter()
        .zip(dist.values.iter())
        .map(|(s, d)| *s == CellState::Free && *d >= clearance)
        .collect();
    FreeSet {
        mask,
        clearance,
        width: grid.width,
        height: grid.height,
        resolution: grid.resolution,
        origin: grid.origin,
    }
}

/// Robot-centred crop whose local +x is the robot heading.
///
/// The returned grid lives in the robot frame: its origin is
/// `(-size·res/2, -size·res/2)`, so the robot sits at local (0, 0).
pub fn extract_local_egocentric<T: Real>(global: &OccupancyGrid<T>, robot: Pose2D<T>, size: usize) -> OccupancyGrid<T> {
    assert!(size > 0, "local map size must be positive");
    let res = global.resolution;
    let half = T::from_usize_lossy(size) * res * T::lit(0.5);
    let mut local = OccupancyGrid::filled(size, size, res, Vec2::new(-half, -half), CellState::Unknown);
    for k in 0..local.cells.len() {
        let c = local.cell_of_index(k);
        let world = robot.transform(local.grid_to_world(c));
        local.cells[k] = global.state_at(world);
    }
    local
}
