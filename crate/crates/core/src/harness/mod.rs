//! Success model, per-trial pipeline, suites and ablations.

mod heatmap;
mod report;
mod suite;

pub use heatmap::{density_grid, render_heatmap, KDE_BANDWIDTH};
pub use report::{EvalReport, MethodRow, TaskRow};
pub use suite::{ablate_alpha, ablate_projection, load_suite, run_suite, LoadedTask, SuiteEntry, SuiteSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, PivotConfig, PivotVariant, Planner, RrtConfig};
use crate::gridmap::FreeSet;
use crate::keypoints::{cluster_features, propose_keypoints, prune, select_affordance_point, DEFAULT_K, PRUNE_DISTANCE};
use crate::optimizer::{self, AlphaMode};
use crate::oracle::http::HttpOracle;
use crate::oracle::{Attachment, CueLevel, GroundTruth, ScriptedOracle, ScriptedOracleConfig, SemanticOracle};
use crate::projection::render::{affordance_view, obstacle_map_plus, Overlays};
use crate::projection::{backproject_mask, select_direction, AffordanceContext, FAN_HALF_ANGLE};
use crate::rng::{self, RngInfo};
use crate::scene::{apply_trial, features, randomize_trial, CameraModel, Capture, Scene, SceneObject, TaskSpec};
use crate::trace::{ConfigSnapshot, ContextSummary, FailureReason, MapSnapshot, OracleDescriptor, Outcome, PlanTrace, TrialError, TRACE_SCHEMA};
use crate::{Config, Grid, Point, Pose};

/// Side of the map crop stored in traces, cells.
pub const SNAPSHOT_CELLS: usize = 120;
/// Side of the egocentric map sent to the oracle, cells.
pub const LOCAL_CELLS: usize = 160;
pub const RENDER_SCALE: usize = 3;

/// Geometric stand-in for "the arm can do the task from here".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessModel {
    pub radius: f64,
    pub reach_tolerance: f64,
    pub require_fan: bool,
}

impl SuccessModel {
    pub fn for_task(task: &TaskSpec, direction_constrained: bool) -> Self {
        Self { radius: task.preferred_radius, reach_tolerance: task.reach_tolerance, require_fan: direction_constrained }
    }
}

/// Collision first, then distance to the keypoint, then approach side.
pub fn evaluate_success(placement: Pose, truth: &GroundTruth, model: &SuccessModel, free: &FreeSet<f64>) -> Outcome {
    let p = placement.position();
    if !free.contains(p) {
        return Outcome::failure(FailureReason::Collision);
    }
    if (p.dist(truth.keypoint) - model.radius).abs() > model.reach_tolerance {
        return Outcome::failure(FailureReason::Distance);
    }
    if model.require_fan && !truth.in_fan(p, truth.direction) {
        return Outcome::failure(FailureReason::Direction);
    }
    Outcome::SUCCESS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    Ours { alpha: AlphaMode, cue: CueLevel },
    ObjectCenter { planner: Planner },
    AffordancePoint { planner: Planner },
    Pivot { variant: PivotVariant },
}

impl Method {
    pub const OURS: Method = Method::Ours { alpha: AlphaMode::Schedule, cue: CueLevel::Full };

    /// The full method and the six comparison methods.
    pub fn standard() -> Vec<Method> {
        vec![
            Method::OURS,
            Method::ObjectCenter { planner: Planner::Astar },
            Method::ObjectCenter { planner: Planner::RrtStar },
            Method::AffordancePoint { planner: Planner::Astar },
            Method::AffordancePoint { planner: Planner::RrtStar },
            Method::Pivot { variant: PivotVariant::RgbOnly },
            Method::Pivot { variant: PivotVariant::Multimodal },
        ]
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

fn planner_tag(p: Planner) -> &'static str {
    match p {
        Planner::Astar => "astar",
        Planner::RrtStar => "rrt_star",
    }
}

fn cue_tag(c: CueLevel) -> &'static str {
    match c {
        CueLevel::Full => "full",
        CueLevel::No12Arrows => "no_12_arrows",
        CueLevel::NoDirectionA => "no_direction_a",
        CueLevel::None => "none",
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ours { alpha, cue } => {
                write!(f, "ours")?;
                if let AlphaMode::Fixed(a) = alpha {
                    write!(f, "[alpha={a}]")?;
                }
                if *cue != CueLevel::Full {
                    write!(f, "[proj={}]", cue_tag(*cue))?;
                }
                Ok(())
            }
            Method::ObjectCenter { planner } => write!(f, "object_center+{}", planner_tag(*planner)),
            Method::AffordancePoint { planner } => write!(f, "affordance_point+{}", planner_tag(*planner)),
            Method::Pivot { variant: PivotVariant::RgbOnly } => write!(f, "pivot_rgb_only"),
            Method::Pivot { variant: PivotVariant::Multimodal } => write!(f, "pivot_multimodal"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let planner = |p: &str| match p {
            "astar" => Ok(Planner::Astar),
            "rrt_star" | "rrt" => Ok(Planner::RrtStar),
            _ => Err(format!("unknown planner `{p}`")),
        };
        if let Some(rest) = s.strip_prefix("ours") {
            let mut alpha = AlphaMode::Schedule;
            let mut cue = CueLevel::Full;
            for part in rest.split('[').filter(|p| !p.is_empty()) {
                let part = part.strip_suffix(']').ok_or_else(|| format!("bad method `{s}`"))?;
                match part.split_once('=') {
                    Some(("alpha", v)) => alpha = AlphaMode::Fixed(v.parse().map_err(|_| format!("bad alpha `{v}`"))?),
                    Some(("proj", v)) => {
                        cue = match v {
                            "full" => CueLevel::Full,
                            "no_12_arrows" => CueLevel::No12Arrows,
                            "no_direction_a" => CueLevel::NoDirectionA,
                            "none" => CueLevel::None,
                            _ => return Err(format!("unknown projection `{v}`")),
                        }
                    }
                    _ => return Err(format!("bad method option `{part}`")),
                }
            }
            return Ok(Method::Ours { alpha, cue });
        }
        if let Some(p) = s.strip_prefix("object_center+") {
            return Ok(Method::ObjectCenter { planner: planner(p)? });
        }
        if let Some(p) = s.strip_prefix("affordance_point+") {
            return Ok(Method::AffordancePoint { planner: planner(p)? });
        }
        match s {
            "pivot_rgb_only" => Ok(Method::Pivot { variant: PivotVariant::RgbOnly }),
            "pivot_multimodal" => Ok(Method::Pivot { variant: PivotVariant::Multimodal }),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

#[derive(Clone)]
pub enum OracleSource {
    Scripted(ScriptedOracleConfig),
    Http(HttpOracle),
}

impl OracleSource {
    pub fn descriptor(&self) -> OracleDescriptor {
        match self {
            OracleSource::Scripted(c) => OracleDescriptor::Scripted(*c),
            OracleSource::Http(h) => (&h.config).into(),
        }
    }

    /// A fresh oracle for one trial. The scripted oracle's seed and cue
    /// level come from the trial, not from the stored config.
    pub fn build(&self, truth: GroundTruth, seed: u64, cue: CueLevel) -> Box<dyn SemanticOracle> {
        match self {
            OracleSource::Scripted(c) => Box::new(ScriptedOracle::new(ScriptedOracleConfig { seed, cue, ..*c }, truth)),
            OracleSource::Http(h) => Box::new(h.clone()),
        }
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self, OracleSource::Scripted(_))
    }
}

#[derive(Clone)]
pub struct Settings {
    pub planner: Config,
    pub rrt: RrtConfig,
    pub pivot: PivotConfig,
    pub oracle: OracleSource,
    /// Render and attach images to every query. The scripted oracle does
    /// not look at them.
    pub render_attachments: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            planner: Config::default(),
            rrt: RrtConfig::default(),
            pivot: PivotConfig::default(),
            oracle: OracleSource::Scripted(ScriptedOracleConfig::default()),
            render_attachments: false,
        }
    }
}

impl Settings {
    pub fn snapshot(&self, method: &Method) -> ConfigSnapshot {
        let mut planner = self.planner;
        if let Method::Ours { alpha, .. } = method {
            planner.alpha = *alpha;
        }
        ConfigSnapshot { planner, rrt: self.rrt, pivot: self.pivot, oracle: self.oracle.descriptor() }
    }
}

pub struct Trial<'a> {
    pub scene: &'a Scene,
    pub scene_name: &'a str,
    pub task: &'a TaskSpec,
    pub task_name: &'a str,
    pub base_seed: u64,
    pub trial_index: usize,
    pub seed: u64,
}

fn overlays_for(cue: CueLevel) -> Overlays {
    Overlays { arrows: cue.shows_arrows(), fan: cue.shows_fan() || cue == CueLevel::No12Arrows, label_a: cue != CueLevel::None && cue != CueLevel::NoDirectionA }
}

/// Builds query images, or nothing when rendering is off.
struct Painter<'a> {
    on: bool,
    grid: &'a Grid,
    robot: Pose,
    ctx: Option<&'a AffordanceContext>,
    overlays: Overlays,
    with_affordance: bool,
}

impl Painter<'_> {
    fn map(&self, marks: &[(i32, Point)]) -> Vec<Attachment> {
        if !self.on {
            return Vec::new();
        }
        let d = obstacle_map_plus(self.grid, self.robot, self.ctx, marks, self.overlays, LOCAL_CELLS, RENDER_SCALE);
        let mut out = vec![Attachment { name: "obstacle_map_plus".into(), image: d.raster() }];
        if let (true, Some(ctx)) = (self.with_affordance, self.ctx) {
            let a = affordance_view(self.grid, ctx, marks, self.overlays, SNAPSHOT_CELLS, RENDER_SCALE);
            out.push(Attachment { name: "affordance".into(), image: a.raster() });
        }
        out
    }

    fn keypoints(&self, marks: &[(i32, Point)]) -> Vec<Attachment> {
        match (self.on, self.ctx) {
            (true, Some(ctx)) => vec![Attachment { name: "affordance".into(), image: affordance_view(self.grid, ctx, marks, Overlays::NONE, SNAPSHOT_CELLS, RENDER_SCALE).raster() }],
            _ => Vec::new(),
        }
    }
}

struct Perception {
    target: SceneObject,
    camera: CameraModel,
    capture: Capture,
}

fn choose_keypoint(p: &Perception, seed: u64, instruction: &str, oracle: &mut dyn SemanticOracle, painter: &Painter, log: &mut Vec<crate::oracle::Exchange>) -> Result<(Point, Vec<Point>), TrialError> {
    let fg = features::synthesize(&p.target, &p.capture, &p.camera);
    let clusters = cluster_features(&fg, DEFAULT_K, rng::derive_seed(seed, "kmeans")).map_err(TrialError::planning)?;
    let proposals = prune(propose_keypoints(&clusters, &fg, &p.capture, &p.camera), PRUNE_DISTANCE);
    let xy: Vec<Point> = proposals.iter().map(|k| k.xy()).collect();
    let marks: Vec<(i32, Point)> = xy.iter().enumerate().map(|(k, x)| (k as i32, *x)).collect();
    let (_, g) = select_affordance_point(&proposals, instruction, oracle, painter.keypoints(&marks), log).map_err(|e| match e {
        crate::keypoints::KeypointError::Oracle(o) => TrialError::oracle(o),
        other => TrialError::planning(other),
    })?;
    Ok((g, xy))
}

/// Run one (method, task, seed) trial end to end. Never panics on trial
/// failures; they end up in `trace.error` and `trace.outcome`.
pub fn run_trial(method: &Method, trial: &Trial, settings: &Settings) -> PlanTrace {
    let constrained = trial.scene.target(trial.task).map(|t| t.direction_constrained).unwrap_or(false);
    let mut trace = PlanTrace {
        schema: TRACE_SCHEMA,
        method: method.tag(),
        scene: trial.scene_name.to_string(),
        task: trial.task_name.to_string(),
        instruction: trial.task.sub_instruction.clone(),
        direction_constrained: constrained,
        base_seed: trial.base_seed,
        trial_index: trial.trial_index,
        seed: trial.seed,
        rng: RngInfo::new(trial.seed),
        config: settings.snapshot(method),
        setup: None,
        truth: None,
        map: None,
        context: None,
        iterations: Vec::new(),
        pivot: Vec::new(),
        path: Vec::new(),
        path_cost: None,
        placement: None,
        outcome: Outcome::failure(FailureReason::Skipped),
        error: None,
        exchanges: Vec::new(),
    };
    match pipeline(method, trial, settings, &mut trace) {
        Ok(()) => {}
        Err(e) => {
            log::debug!("{} {} seed {}: {}", trace.method, trace.task, trace.seed, e.message);
            trace.error = Some(e);
        }
    }
    trace
}

fn pipeline(method: &Method, trial: &Trial, settings: &Settings, trace: &mut PlanTrace) -> Result<(), TrialError> {
    let (scene, task, seed) = (trial.scene, trial.task, trial.seed);
    let setup = randomize_trial(scene, task, seed).map_err(TrialError::config)?;
    let world = apply_trial(scene, task, &setup).map_err(TrialError::config)?;
    let target = world.target(task).map_err(TrialError::config)?.clone();
    let free = world.free_set();
    let truth = GroundTruth { object_center: target.bbox.center_xy(), keypoint: target.gt_keypoint_xy(), direction: target.gt_direction, half_angle: task.approach_half_angle };
    let start = setup.robot_start;
    trace.setup = Some(setup);
    trace.truth = Some(truth);
    trace.map = Some(MapSnapshot::crop(&world.grid, truth.object_center, SNAPSHOT_CELLS));

    let cue = match method {
        Method::Ours { cue, .. } => *cue,
        Method::Pivot { variant: PivotVariant::RgbOnly } => CueLevel::None,
        _ => CueLevel::Full,
    };
    let mut oracle = settings.oracle.build(truth, seed, cue);
    let oracle: &mut dyn SemanticOracle = oracle.as_mut();

    let camera = world.head_camera(start, &target);
    let capture = world.capture_from(&camera, &target.id).map_err(TrialError::config)?;
    let footprint = backproject_mask(&capture, &camera, &world.grid);
    let mut ctx = AffordanceContext::new(footprint, &world.grid, start.theta, &free).map_err(TrialError::planning)?;
    let perception = Perception { target, camera, capture };
    let instruction = task.sub_instruction.as_str();
    let render = settings.render_attachments;
    let mut log = Vec::new();
    let mut proposals = Vec::new();

    let result: Result<Pose, TrialError> = (|| match method {
        Method::Ours { alpha, cue } => {
            if cue.shows_arrows() {
                let painter = Painter { on: render, grid: &world.grid, robot: start, ctx: Some(&ctx), overlays: Overlays { fan: false, label_a: false, arrows: true }, with_affordance: false };
                let i = select_direction(&ctx, oracle, instruction, painter.map(&[]), &mut log).map_err(TrialError::oracle)?;
                ctx.set_direction(i, FAN_HALF_ANGLE);
            }
            let painter = Painter { on: render, grid: &world.grid, robot: start, ctx: Some(&ctx), overlays: overlays_for(*cue), with_affordance: false };
            let (g, xy) = choose_keypoint(&perception, seed, instruction, oracle, &painter, &mut log)?;
            proposals = xy;
            ctx.keypoint = Some(g);
            let mut config = settings.planner;
            config.alpha = *alpha;
            let painter = Painter { on: render, grid: &world.grid, robot: start, ctx: Some(&ctx), overlays: overlays_for(*cue), with_affordance: *cue != CueLevel::None };
            let attach = |m: &[(i32, Point)]| painter.map(m);
            let mut prng = rng::stream(seed, "optimizer");
            let out = optimizer::optimize(&ctx, &free, instruction, oracle, &config, &mut prng, &attach, &mut trace.iterations, &mut log).map_err(|e| match e {
                optimizer::OptimizeError::Oracle(o) => TrialError::oracle(o),
                optimizer::OptimizeError::Config(c) => TrialError::config(c),
                other => TrialError::planning(other),
            })?;
            Ok(out.placement)
        }
        Method::ObjectCenter { planner } => {
            let mut prng = rng::stream(seed, "rrt");
            let out = baselines::place_object_center(*planner, start, ctx.centroid, task.preferred_radius, &free, &settings.rrt, &mut prng).map_err(TrialError::planning)?;
            trace.path = out.path;
            trace.path_cost = Some(out.cost);
            Ok(out.placement)
        }
        Method::AffordancePoint { planner } => {
            let painter = Painter { on: render, grid: &world.grid, robot: start, ctx: Some(&ctx), overlays: Overlays::NONE, with_affordance: false };
            let (g, xy) = choose_keypoint(&perception, seed, instruction, oracle, &painter, &mut log)?;
            proposals = xy;
            ctx.keypoint = Some(g);
            let mut prng = rng::stream(seed, "rrt");
            let out = baselines::place_affordance_point(*planner, start, g, task.preferred_radius, &free, &settings.rrt, &mut prng).map_err(TrialError::planning)?;
            trace.path = out.path;
            trace.path_cost = Some(out.cost);
            Ok(out.placement)
        }
        Method::Pivot { variant } => {
            let multimodal = *variant == PivotVariant::Multimodal;
            let painter = Painter {
                on: render,
                grid: &world.grid,
                robot: start,
                ctx: if multimodal { Some(&ctx) } else { None },
                overlays: if multimodal { Overlays::ALL } else { Overlays::NONE },
                with_affordance: multimodal,
            };
            let attach = |m: &[(i32, Point)]| painter.map(m);
            let mut prng = rng::stream(seed, "pivot");
            baselines::pivot_place(start, ctx.centroid, &free, instruction, oracle, &settings.pivot, &mut prng, &attach, &mut trace.pivot, &mut log).map_err(|e| match e {
                baselines::PlanError::Oracle(o) => TrialError::oracle(o),
                other => TrialError::planning(other),
            })
        }
    })();

    trace.exchanges = log;
    trace.context = Some(ContextSummary::new(&ctx, proposals));
    let placement = result?;
    trace.placement = Some(placement);
    let model = SuccessModel::for_task(task, trace.direction_constrained);
    trace.outcome = evaluate_success(placement, &truth, &model, &free);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::compute_free_set;

    fn truth() -> GroundTruth {
        GroundTruth { object_center: Point::new(5.0, 5.0), keypoint: Point::new(5.2, 5.0), direction: 0.0, half_angle: FAN_HALF_ANGLE }
    }

    fn model() -> SuccessModel {
        SuccessModel { radius: 0.7, reach_tolerance: 0.25, require_fan: true }
    }

    fn open() -> FreeSet<f64> {
        compute_free_set(&Grid::new(200, 200, 0.05, Point::zero()), 0.4)
    }

    #[test]
    fn success_examples() {
        let f = open();
        let t = truth();
        let ok = Pose::facing(t.keypoint + Point::new(0.7, 0.0), t.object_center);
        assert_eq!(evaluate_success(ok, &t, &model(), &f), Outcome::SUCCESS);
        let side = Pose::facing(t.keypoint + Point::new(0.0, 0.7), t.object_center);
        assert_eq!(evaluate_success(side, &t, &model(), &f), Outcome::failure(FailureReason::Direction));
        let unconstrained = SuccessModel { require_fan: false, ..model() };
        assert!(evaluate_success(side, &t, &unconstrained, &f).success);
        let far = Pose::facing(t.keypoint + Point::new(1.0, 0.0), t.object_center);
        assert_eq!(evaluate_success(far, &t, &model(), &f), Outcome::failure(FailureReason::Distance));
        let wall = Pose::new(-1.0, 5.0, 0.0);
        assert_eq!(evaluate_success(wall, &t, &model(), &f), Outcome::failure(FailureReason::Collision));
    }

    #[test]
    fn reach_tolerance_is_monotone() {
        let f = open();
        let t = truth();
        for k in 0..50 {
            let p = Pose::new(5.2 + 0.02 * k as f64, 5.0, 0.0);
            let mut last = false;
            for tol in [0.05, 0.1, 0.25, 0.5, 1.0] {
                let s = evaluate_success(p, &t, &SuccessModel { reach_tolerance: tol, ..model() }, &f).success;
                assert!(s || !last);
                last = s;
            }
        }
    }

    #[test]
    fn method_tags_roundtrip() {
        let mut all = Method::standard();
        all.push(Method::Ours { alpha: AlphaMode::Fixed(0.5), cue: CueLevel::Full });
        all.push(Method::Ours { alpha: AlphaMode::Schedule, cue: CueLevel::NoDirectionA });
        all.push(Method::Ours { alpha: AlphaMode::Fixed(0.0), cue: CueLevel::None });
        for m in all {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m, "{}", m.tag());
        }
        assert!("astar".parse::<Method>().is_err());
    }
}
