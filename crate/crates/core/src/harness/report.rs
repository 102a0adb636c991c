use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::trace::PlanTrace;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: String,
    pub direction_constrained: bool,
    pub trials: usize,
    pub successes: usize,
    pub skipped: usize,
    /// Failure counts by reason; "skipped" included.
    pub failures: BTreeMap<String, usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub config_hash: String,
    pub tasks: Vec<TaskRow>,
    pub trials: usize,
    pub successes: usize,
    pub skipped: usize,
    pub constrained_trials: usize,
    pub constrained_successes: usize,
}

impl MethodRow {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn constrained_rate(&self) -> f64 {
        if self.constrained_trials == 0 {
            0.0
        } else {
            self.constrained_successes as f64 / self.constrained_trials as f64
        }
    }

    pub fn task(&self, name: &str) -> Option<&TaskRow> {
        self.tasks.iter().find(|t| t.task == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub base_seed: Option<u64>,
    pub trials_per_task: usize,
    pub tasks: Vec<String>,
    pub methods: Vec<MethodRow>,
    /// sha256 over every method's config snapshot.
    pub config_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl EvalReport {
    /// Aggregate stored traces. Method and task order follow first
    /// appearance.
    pub fn from_traces(traces: &[PlanTrace]) -> Self {
        let mut methods: Vec<MethodRow> = Vec::new();
        let mut tasks: Vec<String> = Vec::new();
        let mut trials = 0;
        for t in traces {
            if !tasks.contains(&t.task) {
                tasks.push(t.task.clone());
            }
            trials = trials.max(t.trial_index + 1);
            let m = match methods.iter_mut().position(|m| m.method == t.method) {
                Some(i) => &mut methods[i],
                None => {
                    let config = serde_json::to_vec(&t.config).expect("config serializes");
                    methods.push(MethodRow {
                        method: t.method.clone(),
                        config_hash: sha256_hex(&config),
                        tasks: Vec::new(),
                        trials: 0,
                        successes: 0,
                        skipped: 0,
                        constrained_trials: 0,
                        constrained_successes: 0,
                    });
                    methods.last_mut().expect("just pushed")
                }
            };
            let row = match m.tasks.iter_mut().position(|r| r.task == t.task) {
                Some(i) => &mut m.tasks[i],
                None => {
                    m.tasks.push(TaskRow {
                        task: t.task.clone(),
                        direction_constrained: t.direction_constrained,
                        trials: 0,
                        successes: 0,
                        skipped: 0,
                        failures: BTreeMap::new(),
                        seeds: Vec::new(),
                    });
                    m.tasks.last_mut().expect("just pushed")
                }
            };
            row.trials += 1;
            row.seeds.push(t.seed);
            m.trials += 1;
            if t.direction_constrained {
                m.constrained_trials += 1;
            }
            if t.outcome.success {
                row.successes += 1;
                m.successes += 1;
                if t.direction_constrained {
                    m.constrained_successes += 1;
                }
            } else {
                let reason = t.outcome.reason.map(|r| r.as_str()).unwrap_or("unreported");
                *row.failures.entry(reason.to_string()).or_default() += 1;
                if reason == "skipped" {
                    row.skipped += 1;
                    m.skipped += 1;
                }
            }
        }
        let mut hasher = Sha256::new();
        for m in &methods {
            hasher.update(m.config_hash.as_bytes());
        }
        let config_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let base_seed = traces.first().map(|t| t.base_seed);
        Self { schema: REPORT_SCHEMA, base_seed, trials_per_task: trials, tasks, methods, config_hash }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// sha256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("report serializes"))
    }

    pub fn method(&self, tag: &str) -> Option<&MethodRow> {
        self.methods.iter().find(|m| m.method == tag)
    }

    /// Aligned text table, one row per method, n/trials per task.
    pub fn to_table(&self) -> String {
        let w0 = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
        let widths: Vec<usize> = self.tasks.iter().map(|t| t.len().max(7)).collect();
        let mut s = format!("{:<w0$}", "method");
        for (t, w) in self.tasks.iter().zip(&widths) {
            let _ = write!(s, "  {t:>w$}");
        }
        s.push_str("    total  skipped\n");
        for m in &self.methods {
            let _ = write!(s, "{:<w0$}", m.method);
            for (t, w) in self.tasks.iter().zip(&widths) {
                let cell = m.task(t).map(|r| format!("{}/{}", r.successes, r.trials)).unwrap_or_else(|| "-".into());
                let _ = write!(s, "  {cell:>w$}");
            }
            let _ = writeln!(s, "  {:>6.1}%  {:>7}", 100.0 * m.rate(), m.skipped);
        }
        s
    }
}
