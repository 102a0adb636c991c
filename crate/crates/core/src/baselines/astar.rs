//! 8-connected grid search over the free set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::{PathPlanQuery, PlanError, PlanOutcome};
use crate::gridmap::{Cell, FreeSet};
use crate::Pose;

/// Path cost as a count of straight and diagonal moves, so that equal
/// costs compare equal regardless of summation order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl StepCost {
    /// Cost in cells.
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }

    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self { diagonal: self.diagonal + 1, ..self }
        } else {
            Self { straight: self.straight + 1, ..self }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub cost: StepCost,
}

/// Octile distance in cells.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.i.abs_diff(b.i) as f64;
    let dy = a.j.abs_diff(b.j) as f64;
    dx.max(dy) - dx.min(dy) + dx.min(dy) * SQRT_2
}

struct Entry {
    f: f64,
    h: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // Min-heap on (f, h, node).
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.node.cmp(&self.node))
    }
}

fn neighbours(free: &FreeSet<f64>, c: Cell, out: &mut Vec<(Cell, bool)>) {
    out.clear();
    let ok = |i: i64, j: i64| i >= 0 && j >= 0 && (i as usize) < free.width && (j as usize) < free.height && free.contains_cell(Cell::new(i as usize, j as usize));
    let (ci, cj) = (c.i as i64, c.j as i64);
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            if (di, dj) == (0, 0) || !ok(ci + di, cj + dj) {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            // no corner cutting
            if diagonal && !(ok(ci + di, cj) && ok(ci, cj + dj)) {
                continue;
            }
            out.push((Cell::new((ci + di) as usize, (cj + dj) as usize), diagonal));
        }
    }
}

/// Best-first search from `start` to the first goal cell popped. With a
/// consistent `h` (in cells) this is the cheapest goal cell.
pub fn astar(free: &FreeSet<f64>, start: Cell, goal: impl Fn(Cell) -> bool, h: impl Fn(Cell) -> f64) -> Option<GridPath> {
    if !free.contains_cell(start) {
        return None;
    }
    let idx = |c: Cell| c.j * free.width + c.i;
    let cell = |k: usize| Cell::new(k % free.width, k / free.width);
    let n = free.width * free.height;
    let mut best: Vec<Option<StepCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some(StepCost::default());
    let h0 = h(start);
    heap.push(Entry { f: h0, h: h0, node: idx(start) });
    let mut nb = Vec::with_capacity(8);
    while let Some(Entry { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        let c = cell(node);
        let g = best[node].expect("queued nodes have a cost");
        if goal(c) {
            let mut cells = vec![c];
            let mut k = node;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push(cell(k));
            }
            cells.reverse();
            return Some(GridPath { cells, cost: g });
        }
        neighbours(free, c, &mut nb);
        for &(m, diagonal) in &nb {
            let k = idx(m);
            if closed[k] {
                continue;
            }
            let cand = g.step(diagonal);
            if best[k].is_none_or(|b| cand.value() < b.value()) {
                best[k] = Some(cand);
                parent[k] = node;
                let hm = h(m);
                heap.push(Entry { f: cand.value() + hm, h: hm, node: k });
            }
        }
    }
    None
}

/// Uniform-cost search on the same graph.
pub fn dijkstra(free: &FreeSet<f64>, start: Cell, goal: impl Fn(Cell) -> bool) -> Option<GridPath> {
    astar(free, start, goal, |_| 0.0)
}

/// Shortest grid path to any free cell in the goal band.
pub fn astar_plan(q: &PathPlanQuery, free: &FreeSet<f64>) -> Result<PlanOutcome, PlanError> {
    let start = start_cell(free, q)?;
    let goal = |c: Cell| free.contains_cell(c) && q.in_band(free.cell_center(c));
    let any_goal = (0..free.height).flat_map(|j| (0..free.width).map(move |i| Cell::new(i, j))).any(goal);
    if !any_goal {
        return Err(PlanError::NoGoal);
    }
    let res = free.resolution;
    let outer = q.radius + q.tolerance;
    // Euclidean lower bound to the band's outer circle.
    let h = |c: Cell| ((free.cell_center(c).dist(q.target) - outer) / res).max(0.0);
    let path = astar(free, start, goal, h).ok_or(PlanError::Unreachable)?;
    let end = free.cell_center(*path.cells.last().expect("non-empty path"));
    Ok(PlanOutcome {
        placement: Pose::facing(end, q.target),
        path: path.cells.iter().map(|c| free.cell_center(*c)).collect(),
        cost: path.cost.value() * res,
    })
}

fn start_cell(free: &FreeSet<f64>, q: &PathPlanQuery) -> Result<Cell, PlanError> {
    let p = q.start.position();
    if !free.contains(p) {
        return Err(PlanError::StartBlocked(p));
    }
    let (i, j) = (((p.x - free.origin.x) / free.resolution).floor(), ((p.y - free.origin.y) / free.resolution).floor());
    Ok(Cell::new(i as usize, j as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{compute_free_set, CellState, OccupancyGrid};
    use crate::{Grid, Point};
    use proptest::prelude::*;

    fn open(w: usize, h: usize) -> FreeSet<f64> {
        compute_free_set(&Grid::new(w, h, 1.0, Point::zero()), 0.0)
    }

    #[test]
    fn diagonal_on_empty_grid() {
        let f = open(3, 3);
        let p = astar(&f, Cell::new(0, 0), |c| c == Cell::new(2, 2), |c| octile(c, Cell::new(2, 2))).unwrap();
        assert_eq!(p.cost, StepCost { straight: 0, diagonal: 2 });
        assert!((p.cost.value() - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(p.cells.len(), 3);
    }

    #[test]
    fn wall_detour_matches_dijkstra() {
        let mut g = Grid::new(10, 10, 1.0, Point::zero());
        for j in 0..8 {
            g.set(Cell::new(5, j), CellState::Occupied);
        }
        let f = compute_free_set(&g, 0.0);
        let goal = Cell::new(9, 0);
        let a = astar(&f, Cell::new(0, 0), |c| c == goal, |c| octile(c, goal)).unwrap();
        let d = dijkstra(&f, Cell::new(0, 0), |c| c == goal).unwrap();
        assert_eq!(a.cost, d.cost);
        assert!(a.cost.value() > octile(Cell::new(0, 0), goal));
    }

    #[test]
    fn ringed_target_fails() {
        let mut g = Grid::new(40, 40, 0.05, Point::zero());
        let c = Point::new(1.0, 1.0);
        g.fill_where(CellState::Occupied, |p| (p.dist(c) - 0.7).abs() < 0.15);
        let f = compute_free_set(&g, 0.0);
        let q = PathPlanQuery { start: Pose::new(0.05, 0.05, 0.0), target: c, radius: 0.7, tolerance: 0.05 };
        assert!(matches!(astar_plan(&q, &f), Err(PlanError::NoGoal)));
    }

    #[test]
    fn band_plan_lands_in_band() {
        let f = compute_free_set(&Grid::new(100, 100, 0.05, Point::zero()), 0.0);
        let q = PathPlanQuery { start: Pose::new(0.5, 2.5, 0.0), target: Point::new(3.5, 2.5), radius: 0.7, tolerance: 0.05 };
        let out = astar_plan(&q, &f).unwrap();
        let p = out.placement.position();
        assert!(q.in_band(p));
        assert!(p.x < 3.5, "nearest side of the band, got {p:?}");
        let d = out.placement.heading().dot((q.target - p).normalized().unwrap());
        assert!((d - 1.0).abs() < 1e-9);
    }

    fn random_grid(seed: u64, w: usize, h: usize, density: f64) -> OccupancyGrid<f64> {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_pcg::Pcg64::seed_from_u64(seed);
        let mut g = Grid::new(w, h, 1.0, Point::zero());
        for c in g.cells().collect::<Vec<_>>() {
            if rng.random_bool(density) {
                g.set(c, CellState::Occupied);
            }
        }
        g.set(Cell::new(0, 0), CellState::Free);
        g.set(Cell::new(w - 1, h - 1), CellState::Free);
        g
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn astar_equals_dijkstra(seed in any::<u64>(), w in 2usize..40, h in 2usize..40, density in 0.0f64..0.4) {
            let f = compute_free_set(&random_grid(seed, w, h, density), 0.0);
            let goal = Cell::new(w - 1, h - 1);
            let a = astar(&f, Cell::new(0, 0), |c| c == goal, |c| octile(c, goal));
            let d = dijkstra(&f, Cell::new(0, 0), |c| c == goal);
            prop_assert_eq!(a.map(|p| p.cost), d.map(|p| p.cost));
        }
    }
}
