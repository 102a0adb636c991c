//! RRT* in the continuous plane, collision-checked against the free set.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{PathPlanQuery, PlanError, PlanOutcome};
use crate::gridmap::FreeSet;
use crate::rng::Rng;
use crate::{Point, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Near-radius constant; `None` uses 2·sqrt(3·area_free/π).
    pub gamma: Option<f64>,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self { step: 0.2, max_iters: 5000, gamma: None }
    }
}

impl RrtConfig {
    pub fn gamma_for(&self, free: &FreeSet<f64>) -> f64 {
        self.gamma.unwrap_or_else(|| 2.0 * (3.0 * free.area() / std::f64::consts::PI).sqrt())
    }
}

const BUCKET: f64 = 0.25;

/// Uniform bucket grid over node positions.
struct Index {
    min: Point,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl Index {
    fn new(min: Point, max: Point) -> Self {
        let cols = (((max.x - min.x) / BUCKET).ceil() as usize).max(1);
        let rows = (((max.y - min.y) / BUCKET).ceil() as usize).max(1);
        Self { min, cols, rows, buckets: vec![Vec::new(); cols * rows] }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        let i = (((p.x - self.min.x) / BUCKET).floor() as i64).clamp(0, self.cols as i64 - 1);
        let j = (((p.y - self.min.y) / BUCKET).floor() as i64).clamp(0, self.rows as i64 - 1);
        (i, j)
    }

    fn insert(&mut self, p: Point, id: usize) {
        let (i, j) = self.key(p);
        self.buckets[j as usize * self.cols + i as usize].push(id);
    }

    fn ring(&self, c: (i64, i64), r: i64, mut f: impl FnMut(usize)) {
        for j in c.1 - r..=c.1 + r {
            for i in c.0 - r..=c.0 + r {
                let edge = (i - c.0).abs() == r || (j - c.1).abs() == r;
                if edge && i >= 0 && j >= 0 && (i as usize) < self.cols && (j as usize) < self.rows {
                    for &id in &self.buckets[j as usize * self.cols + i as usize] {
                        f(id);
                    }
                }
            }
        }
    }

    fn nearest(&self, p: Point, pts: &[Point]) -> usize {
        let c = self.key(p);
        let mut best = (f64::INFINITY, usize::MAX);
        let max_r = self.cols.max(self.rows) as i64;
        for r in 0..=max_r {
            self.ring(c, r, |id| {
                let d = pts[id].dist(p);
                if d < best.0 || (d == best.0 && id < best.1) {
                    best = (d, id);
                }
            });
            // Anything in ring r+1 or beyond is at least r·BUCKET away.
            if best.1 != usize::MAX && best.0 <= r as f64 * BUCKET {
                break;
            }
        }
        best.1
    }

    fn within(&self, p: Point, radius: f64, pts: &[Point]) -> Vec<usize> {
        let c = self.key(p);
        let reach = (radius / BUCKET).ceil() as i64 + 1;
        let mut out = Vec::new();
        for r in 0..=reach {
            self.ring(c, r, |id| {
                if pts[id].dist(p) <= radius {
                    out.push(id);
                }
            });
        }
        out.sort_unstable();
        out
    }
}

fn segment_free(free: &FreeSet<f64>, a: Point, b: Point) -> bool {
    let step = free.resolution / 4.0;
    let n = (a.dist(b) / step).ceil().max(1.0) as usize;
    (0..=n).all(|k| free.contains(a + (b - a) * (k as f64 / n as f64)))
}

/// Standard RRT* with rewiring. Returns the cheapest node inside the goal
/// band after `max_iters` samples.
pub fn rrt_star_plan(q: &PathPlanQuery, free: &FreeSet<f64>, config: &RrtConfig, rng: &mut Rng) -> Result<PlanOutcome, PlanError> {
    let s = q.start.position();
    if !free.contains(s) {
        return Err(PlanError::StartBlocked(s));
    }
    if q.in_band(s) {
        return Ok(PlanOutcome { placement: Pose::facing(s, q.target), path: vec![s], cost: 0.0 });
    }
    let (lo, hi) = free.bounds();
    let gamma = config.gamma_for(free);
    let mut pts = vec![s];
    let mut cost = vec![0.0];
    let mut parent = vec![usize::MAX];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut index = Index::new(lo, hi);
    index.insert(s, 0);
    for _ in 0..config.max_iters {
        let x = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if !free.contains(x) {
            continue;
        }
        let near_id = index.nearest(x, &pts);
        let from = pts[near_id];
        let d = from.dist(x);
        let new = if d > config.step { from + (x - from) * (config.step / d) } else { x };
        if new.dist(from) == 0.0 || !segment_free(free, from, new) {
            continue;
        }
        let n = pts.len() as f64 + 1.0;
        let radius = (gamma * (n.ln() / n).sqrt()).max(config.step);
        let near = index.within(new, radius, &pts);
        let mut best = (cost[near_id] + from.dist(new), near_id);
        for &k in &near {
            let c = cost[k] + pts[k].dist(new);
            if c < best.0 && k != near_id && segment_free(free, pts[k], new) {
                best = (c, k);
            }
        }
        let id = pts.len();
        pts.push(new);
        cost.push(best.0);
        parent.push(best.1);
        children.push(Vec::new());
        children[best.1].push(id);
        index.insert(new, id);
        for &k in &near {
            if k == best.1 {
                continue;
            }
            let c = best.0 + new.dist(pts[k]);
            if c < cost[k] && segment_free(free, new, pts[k]) {
                let old = parent[k];
                children[old].retain(|&ch| ch != k);
                parent[k] = id;
                children[id].push(k);
                let delta = cost[k] - c;
                let mut stack = vec![k];
                while let Some(m) = stack.pop() {
                    cost[m] -= delta;
                    stack.extend(children[m].iter().copied());
                }
            }
        }
    }
    let goal = (0..pts.len()).filter(|&k| q.in_band(pts[k])).min_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
    let Some(g) = goal else {
        return Err(PlanError::Unreachable);
    };
    let mut path = vec![pts[g]];
    let mut k = g;
    while parent[k] != usize::MAX {
        k = parent[k];
        path.push(pts[k]);
    }
    path.reverse();
    Ok(PlanOutcome { placement: Pose::facing(pts[g], q.target), path, cost: cost[g] })
}
