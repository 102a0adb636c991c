//! Scene and task documents, seeded trial randomization, synthetic capture.

pub mod camera;
pub mod features;

use std::collections::HashSet;
use std::path::Path;

use rand::RngExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{normalize_angle, Vec2};
use crate::gridmap::{compute_free_set, io as grid_io, CellState, FreeSet, OccupancyGrid};
use crate::rng;
use crate::{Point, Pose};

pub use camera::{CameraModel, Capture, RigidTransform, Vec3};

pub const SCHEMA: u32 = 1;
pub const START_CLEARANCE: f64 = 0.4;
const START_ATTEMPTS: usize = 10_000;
/// Footprints closer than this move together.
const TOUCH: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error("object `{id}`: {msg}")]
    Object { id: String, msg: String },
    #[error("no collision-free start pose after {0} attempts")]
    NoStart(usize),
}

fn field(field: &str, msg: impl Into<String>) -> SceneError {
    SceneError::Field { field: field.into(), msg: msg.into() }
}

/// 3D box: full extents, yawed about world z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub center: Vec3,
    pub extents: Vec3,
    #[serde(default)]
    pub yaw: f64,
}

impl Box3 {
    pub fn center_xy(&self) -> Point {
        Vec2::new(self.center[0], self.center[1])
    }

    /// Point in the box's own frame (axes along its extents).
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.center[2]]
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|a| l[a].abs() <= self.extents[a] / 2.0 + tol)
    }

    pub fn footprint_contains(&self, p: Point) -> bool {
        let l = self.to_local([p.x, p.y, self.center[2]]);
        l[0].abs() <= self.extents[0] / 2.0 && l[1].abs() <= self.extents[1] / 2.0
    }

    pub fn footprint_corners(&self) -> [Point; 4] {
        let hx = self.extents[0] / 2.0;
        let hy = self.extents[1] / 2.0;
        let c = self.center_xy();
        [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].map(|(x, y)| c + Vec2::new(x, y).rotate(self.yaw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    #[serde(rename = "box")]
    pub bbox: Box3,
    pub gt_keypoint: Vec3,
    pub gt_direction: f64,
    #[serde(default)]
    pub direction_constrained: bool,
}

impl SceneObject {
    pub fn gt_keypoint_xy(&self) -> Point {
        Vec2::new(self.gt_keypoint[0], self.gt_keypoint[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSource {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default)]
    pub walls: Vec<Rect>,
    /// Optional base map, relative to the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pgm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub map: MapSource,
    pub objects: Vec<SceneObject>,
    pub camera: CameraModel,
}

/// A validated scene together with its rasterized global map.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub grid: OccupancyGrid<f64>,
    /// Walls and base map only, before object footprints are stamped.
    pub base_grid: OccupancyGrid<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Randomization {
    /// Start distance from the object centre, meters.
    pub start_radius: [f64; 2],
    /// Start bearing around the object, radians relative to `gt_direction`.
    pub start_bearing: [f64; 2],
    /// Symmetric half-ranges of the rigid object-group perturbation.
    #[serde(default)]
    pub object_dx: f64,
    #[serde(default)]
    pub object_dy: f64,
    #[serde(default)]
    pub object_dyaw: f64,
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            start_radius: [1.0, 1.5],
            start_bearing: [-std::f64::consts::PI, std::f64::consts::PI],
            object_dx: 0.0,
            object_dy: 0.0,
            object_dyaw: 0.0,
        }
    }
}

fn default_radius() -> f64 {
    0.7
}
fn default_reach() -> f64 {
    0.25
}
fn default_half_angle() -> f64 {
    std::f64::consts::FRAC_PI_3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub schema: u32,
    pub object_id: String,
    pub sub_instruction: String,
    #[serde(default = "default_radius")]
    pub preferred_radius: f64,
    #[serde(default = "default_reach")]
    pub reach_tolerance: f64,
    #[serde(default = "default_half_angle")]
    pub approach_half_angle: f64,
    #[serde(default)]
    pub randomization: Randomization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPerturbation {
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub seed: u64,
    pub robot_start: Pose,
    /// Rigid motion of the target's attached group about the target's centre.
    pub perturbation: ObjectPerturbation,
}

fn check_positive(name: &str, v: f64) -> Result<(), SceneError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field(name, format!("must be positive, got {v}")))
    }
}

impl SceneSpec {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema != SCHEMA {
            return Err(field("schema", format!("expected {SCHEMA}, got {}", self.schema)));
        }
        let m = &self.map;
        if m.width == 0 || m.height == 0 {
            return Err(field("map.width", "map must have at least one cell"));
        }
        check_positive("map.resolution", m.resolution)?;
        let c = &self.camera;
        check_positive("camera.fx", c.fx)?;
        check_positive("camera.fy", c.fy)?;
        if c.width == 0 || c.height == 0 {
            return Err(field("camera.width", "image must have at least one pixel"));
        }
        if !c.extrinsic.is_proper(1e-6) {
            return Err(field("camera.extrinsic.rotation", "not a proper rotation"));
        }
        let lo = Vec2::new(m.origin[0], m.origin[1]);
        let hi = lo + Vec2::new(m.width as f64 * m.resolution, m.height as f64 * m.resolution);
        let mut seen = HashSet::new();
        for o in &self.objects {
            let err = |msg: String| SceneError::Object { id: o.id.clone(), msg };
            if !seen.insert(o.id.as_str()) {
                return Err(err("duplicate object id".into()));
            }
            if o.bbox.extents.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err(err("box extents must be positive".into()));
            }
            for p in o.bbox.footprint_corners() {
                if p.x < lo.x || p.y < lo.y || p.x > hi.x || p.y > hi.y {
                    return Err(err(format!("box corner ({:.3}, {:.3}) outside the map", p.x, p.y)));
                }
            }
            if !o.bbox.contains(o.gt_keypoint, 1e-6) {
                return Err(err("gt_keypoint lies outside its box".into()));
            }
            if !o.gt_direction.is_finite() {
                return Err(err("gt_direction must be finite".into()));
            }
        }
        Ok(())
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema != SCHEMA {
            return Err(field("schema", format!("expected {SCHEMA}, got {}", self.schema)));
        }
        check_positive("preferred_radius", self.preferred_radius)?;
        check_positive("reach_tolerance", self.reach_tolerance)?;
        let a = self.approach_half_angle;
        if !(a > 0.0 && a <= std::f64::consts::PI) {
            return Err(field("approach_half_angle", "must lie in (0, π]"));
        }
        let r = &self.randomization;
        if !(r.start_radius[0] >= 0.0 && r.start_radius[0] <= r.start_radius[1]) {
            return Err(field("randomization.start_radius", "expected 0 ≤ a ≤ b"));
        }
        if r.start_bearing[0] > r.start_bearing[1] {
            return Err(field("randomization.start_bearing", "expected a ≤ b"));
        }
        for (n, v) in [("object_dx", r.object_dx), ("object_dy", r.object_dy), ("object_dyaw", r.object_dyaw)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field(&format!("randomization.{n}"), "must be a non-negative half-range"));
            }
        }
        Ok(())
    }
}

fn parse<T: for<'de> Deserialize<'de>>(doc: &str) -> Result<T, SceneError> {
    serde_json::from_str(doc).map_err(|e| SceneError::Schema(e.to_string()))
}

/// Parse and validate a scene document. `base` resolves a relative `map.pgm`.
pub fn load_scene_str(doc: &str, base: Option<&Path>) -> Result<Scene, SceneError> {
    let spec: SceneSpec = parse(doc)?;
    Scene::build(spec, base)
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let doc = std::fs::read_to_string(path).map_err(|e| SceneError::Io { path: path.display().to_string(), source: e })?;
    load_scene_str(&doc, path.parent())
}

pub fn load_task_str(doc: &str) -> Result<TaskSpec, SceneError> {
    let t: TaskSpec = parse(doc)?;
    t.validate()?;
    Ok(t)
}

pub fn load_task(path: &Path) -> Result<TaskSpec, SceneError> {
    let doc = std::fs::read_to_string(path).map_err(|e| SceneError::Io { path: path.display().to_string(), source: e })?;
    load_task_str(&doc)
}

impl Scene {
    pub fn build(spec: SceneSpec, base: Option<&Path>) -> Result<Self, SceneError> {
        spec.validate()?;
        let m = &spec.map;
        let origin = Vec2::new(m.origin[0], m.origin[1]);
        let mut grid = match &m.pgm {
            Some(rel) => {
                let p = base.map(|b| b.join(rel)).unwrap_or_else(|| rel.into());
                let g: OccupancyGrid<f64> = grid_io::load(&p).map_err(|e| SceneError::Io { path: p.display().to_string(), source: e })?;
                if g.width != m.width || g.height != m.height {
                    return Err(field("map.pgm", "size disagrees with map.width/height"));
                }
                g
            }
            None => OccupancyGrid::new(m.width, m.height, m.resolution, origin),
        };
        for w in &m.walls {
            grid.fill_rect(Vec2::from(w.min), Vec2::from(w.max), CellState::Occupied);
        }
        Ok(Self::stamp(spec, grid))
    }

    fn stamp(spec: SceneSpec, base_grid: OccupancyGrid<f64>) -> Self {
        let mut grid = base_grid.clone();
        for o in &spec.objects {
            let b = o.bbox;
            grid.fill_where(CellState::Occupied, |p| b.footprint_contains(p));
        }
        Self { spec, grid, base_grid }
    }

    pub fn target(&self, task: &TaskSpec) -> Result<&SceneObject, SceneError> {
        self.spec.object(&task.object_id).ok_or_else(|| field("object_id", format!("no object `{}` in scene", task.object_id)))
    }

    pub fn free_set(&self) -> FreeSet<f64> {
        compute_free_set(&self.grid, START_CLEARANCE)
    }

    /// Indices of `target` and every object connected to it through
    /// touching footprints (a pot and its table, a dishwasher and its
    /// counter).
    pub fn attached_group(&self, target: &str) -> Vec<usize> {
        let objs = &self.spec.objects;
        let Some(t) = self.spec.object_index(target) else {
            return Vec::new();
        };
        let aabb = |b: &Box3| {
            let c = b.footprint_corners();
            let lo = c.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, p| Vec2::new(a.x.min(p.x), a.y.min(p.y)));
            let hi = c.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| Vec2::new(a.x.max(p.x), a.y.max(p.y)));
            (lo, hi)
        };
        let touch = |a: usize, b: usize| {
            let ((alo, ahi), (blo, bhi)) = (aabb(&objs[a].bbox), aabb(&objs[b].bbox));
            alo.x <= bhi.x + TOUCH && blo.x <= ahi.x + TOUCH && alo.y <= bhi.y + TOUCH && blo.y <= ahi.y + TOUCH
        };
        let mut group = vec![t];
        let mut k = 0;
        while k < group.len() {
            for o in 0..objs.len() {
                if !group.contains(&o) && touch(group[k], o) {
                    group.push(o);
                }
            }
            k += 1;
        }
        group.sort_unstable();
        group
    }

    /// Copy of the scene with the target's attached group moved rigidly
    /// about the target's centre. Other objects stay put.
    pub fn perturbed(&self, target: &str, p: ObjectPerturbation) -> Result<Scene, SceneError> {
        if p.dx == 0.0 && p.dy == 0.0 && p.dyaw == 0.0 {
            return Ok(self.clone());
        }
        let pivot = self.spec.object(target).ok_or_else(|| field("target", format!("no object `{target}`")))?.bbox.center_xy();
        let group = self.attached_group(target);
        let mut spec = self.spec.clone();
        let shift = Vec2::new(p.dx, p.dy);
        let mv = |q: Vec3| -> Vec3 {
            let r = pivot + (Vec2::new(q[0], q[1]) - pivot).rotate(p.dyaw) + shift;
            [r.x, r.y, q[2]]
        };
        for k in group {
            let o = &mut spec.objects[k];
            o.bbox.center = mv(o.bbox.center);
            o.bbox.yaw = normalize_angle(o.bbox.yaw + p.dyaw);
            o.gt_keypoint = mv(o.gt_keypoint);
            o.gt_direction = normalize_angle(o.gt_direction + p.dyaw);
        }
        spec.validate()?;
        Ok(Scene::stamp(spec, self.base_grid.clone()))
    }

    /// Depth and instance mask from the scene camera.
    pub fn synthetic_capture(&self, target: &str) -> Result<Capture, SceneError> {
        self.capture_from(&self.spec.camera, target)
    }

    pub fn capture_from(&self, camera: &CameraModel, target: &str) -> Result<Capture, SceneError> {
        let idx = self.spec.object_index(target).ok_or_else(|| field("target", format!("no object `{target}`")))?;
        let boxes: Vec<Box3> = self.spec.objects.iter().map(|o| o.bbox).collect();
        Ok(camera::capture_boxes(camera, &boxes, idx))
    }

    /// Robot head camera: the scene intrinsics, mounted at the scene
    /// camera's height above `robot`, looking at the object's box centre.
    pub fn head_camera(&self, robot: Pose, target: &SceneObject) -> CameraModel {
        let h = self.spec.camera.extrinsic.translation[2];
        let eye = [robot.x, robot.y, h];
        self.spec.camera.with_extrinsic(RigidTransform::look_at(eye, target.bbox.center))
    }
}

/// Draw a start pose and object perturbation for one trial.
///
/// The start lies at a random radius and bearing around the (perturbed)
/// target centre, inside the clearance-free set, facing the object.
pub fn randomize_trial(scene: &Scene, task: &TaskSpec, seed: u64) -> Result<TrialSetup, SceneError> {
    scene.target(task)?;
    let r = &task.randomization;
    let mut prng = rng::stream(seed, "trial-setup");
    let mut sym = |h: f64| if h > 0.0 { prng.random_range(-h..=h) } else { 0.0 };
    let perturbation = ObjectPerturbation { dx: sym(r.object_dx), dy: sym(r.object_dy), dyaw: sym(r.object_dyaw) };
    let moved = scene.perturbed(&task.object_id, perturbation)?;
    let target = moved.target(task)?;
    let free = moved.free_set();
    let centre = target.bbox.center_xy();
    let mut srng = rng::stream(seed, "start-pose");
    let range = |rng: &mut rng::Rng, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    for _ in 0..START_ATTEMPTS {
        let rad = range(&mut srng, r.start_radius[0], r.start_radius[1]);
        let bearing = target.gt_direction + range(&mut srng, r.start_bearing[0], r.start_bearing[1]);
        let p = centre + Vec2::from_angle(bearing) * rad;
        if free.contains(p) {
            return Ok(TrialSetup { seed, robot_start: Pose::facing(p, centre), perturbation });
        }
    }
    Err(SceneError::NoStart(START_ATTEMPTS))
}

/// The scene as it looks in a given trial.
pub fn apply_trial(scene: &Scene, task: &TaskSpec, setup: &TrialSetup) -> Result<Scene, SceneError> {
    scene.target(task)?;
    scene.perturbed(&task.object_id, setup.perturbation)
}
