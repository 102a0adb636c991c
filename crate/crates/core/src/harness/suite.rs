use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial, EvalReport, Method, Settings, Trial};
use crate::optimizer::AlphaMode;
use crate::oracle::CueLevel;
use crate::rng;
use crate::scene::{load_scene, load_task, Scene, SceneError, TaskSpec};
use crate::trace::PlanTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub scene: PathBuf,
    pub task: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub schema: u32,
    pub entries: Vec<SuiteEntry>,
}

pub struct LoadedTask {
    pub scene_name: String,
    pub task_name: String,
    pub scene: Scene,
    pub task: TaskSpec,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl LoadedTask {
    pub fn load(scene: &Path, task: &Path) -> Result<Self, SceneError> {
        Ok(Self { scene_name: stem(scene), task_name: stem(task), scene: load_scene(scene)?, task: load_task(task)? })
    }
}

/// Load a suite file; entry paths are relative to it.
pub fn load_suite(path: &Path) -> Result<Vec<LoadedTask>, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io { path: path.display().to_string(), source: e })?;
    let spec: SuiteSpec = serde_json::from_str(&text).map_err(|e| SceneError::Schema(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    spec.entries.iter().map(|e| LoadedTask::load(&base.join(&e.scene), &base.join(&e.task))).collect()
}

/// Every (method, task, trial) combination, traces in that order.
pub fn run_suite(methods: &[Method], tasks: &[LoadedTask], trials: usize, base_seed: u64, settings: &Settings) -> (EvalReport, Vec<PlanTrace>) {
    let jobs: Vec<(usize, usize, usize)> = (0..methods.len()).flat_map(|m| (0..tasks.len()).flat_map(move |t| (0..trials).map(move |k| (m, t, k)))).collect();
    let run = |&(m, t, k): &(usize, usize, usize)| {
        let lt = &tasks[t];
        let seed = rng::derive_seed(rng::trial_seed(base_seed, k as u64), &lt.task_name);
        let trial = Trial { scene: &lt.scene, scene_name: &lt.scene_name, task: &lt.task, task_name: &lt.task_name, base_seed, trial_index: k, seed };
        run_trial(&methods[m], &trial, settings)
    };
    let traces: Vec<PlanTrace> = if settings.oracle.is_scripted() { jobs.par_iter().map(run).collect() } else { jobs.iter().map(run).collect() };
    (EvalReport::from_traces(&traces), traces)
}

/// Full method with α overridden, one row per value.
pub fn ablate_alpha(values: &[AlphaMode], tasks: &[LoadedTask], trials: usize, base_seed: u64, settings: &Settings) -> (EvalReport, Vec<PlanTrace>) {
    let methods: Vec<Method> = values.iter().map(|a| Method::Ours { alpha: *a, cue: CueLevel::Full }).collect();
    run_suite(&methods, tasks, trials, base_seed, settings)
}

/// Full method under each projection variant.
pub fn ablate_projection(tasks: &[LoadedTask], trials: usize, base_seed: u64, settings: &Settings) -> (EvalReport, Vec<PlanTrace>) {
    let methods: Vec<Method> = [CueLevel::Full, CueLevel::No12Arrows, CueLevel::NoDirectionA, CueLevel::None].iter().map(|c| Method::Ours { alpha: AlphaMode::Schedule, cue: *c }).collect();
    run_suite(&methods, tasks, trials, base_seed, settings)
}
