//! Iterative visual prompting: sample around a mean, let the oracle pick,
//! refit, shrink.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::geom::mean;
use crate::gridmap::FreeSet;
use crate::optimizer::RankAttachments;
use crate::oracle::{self, Exchange, OptionItem, OracleQuery, QueryKind, SemanticOracle};
use crate::rng::Rng;
use crate::{Point, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotVariant {
    /// The oracle sees only the raw map raster.
    RgbOnly,
    /// The oracle sees Obstacle Map+ and the affordance raster.
    Multimodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotConfig {
    pub samples: usize,
    pub picks: usize,
    pub iterations: usize,
    pub initial_sigma: f64,
    pub shrink: f64,
    /// Lower bound on covariance eigenvalues, m².
    pub floor: f64,
    pub attempts_per_sample: usize,
}

impl Default for PivotConfig {
    fn default() -> Self {
        Self { samples: 20, picks: 3, iterations: 4, initial_sigma: 1.0, shrink: 0.5, floor: 0.05 * 0.05, attempts_per_sample: 100 }
    }
}

pub type Cov = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotIteration {
    pub mean: Point,
    pub cov: Cov,
    pub candidates: Vec<Point>,
    pub picks: Vec<i32>,
}

/// Eigen-decomposition of a symmetric 2×2 matrix: (values, unit vectors).
pub fn sym_eigen(m: Cov) -> ([f64; 2], [Point; 2]) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (tr + disc, tr - disc);
    let v1 = if b.abs() > 1e-15 {
        Point::new(l1 - d, b).normalized().expect("non-zero")
    } else if a >= d {
        Point::new(1.0, 0.0)
    } else {
        Point::new(0.0, 1.0)
    };
    let v2 = Point::new(-v1.y, v1.x);
    ([l1, l2], [v1, v2])
}

pub fn clamp_eigen(m: Cov, floor: f64) -> Cov {
    let (l, v) = sym_eigen(m);
    let l = [l[0].max(floor), l[1].max(floor)];
    let mut out = [[0.0; 2]; 2];
    for k in 0..2 {
        let u = [v[k].x, v[k].y];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] += l[k] * u[r] * u[c];
            }
        }
    }
    out
}

fn sample(mean: Point, cov: Cov, rng: &mut Rng) -> Point {
    let (l, v) = sym_eigen(cov);
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    mean + v[0] * (l[0].max(0.0).sqrt() * z0) + v[1] * (l[1].max(0.0).sqrt() * z1)
}

/// Run PIVOT from `start`. The placement is the oracle's top pick of the
/// last round, facing `face`.
#[allow(clippy::too_many_arguments)]
pub fn pivot_place(
    start: Pose,
    face: Point,
    free: &FreeSet<f64>,
    instruction: &str,
    oracle: &mut dyn SemanticOracle,
    config: &PivotConfig,
    rng: &mut Rng,
    attach: RankAttachments,
    trace: &mut Vec<PivotIteration>,
    log: &mut Vec<Exchange>,
) -> Result<Pose, PlanError> {
    let s2 = config.initial_sigma * config.initial_sigma;
    let mut mu = start.position();
    let mut cov = [[s2, 0.0], [0.0, s2]];
    let mut last = None;
    for _ in 0..config.iterations {
        let mut candidates = Vec::with_capacity(config.samples);
        let budget = config.attempts_per_sample * config.samples;
        let mut draws = 0;
        while candidates.len() < config.samples && draws < budget {
            draws += 1;
            let x = sample(mu, cov, rng);
            if free.contains(x) {
                candidates.push(x);
            }
        }
        if candidates.is_empty() {
            return Err(PlanError::NoFeasibleSample(budget));
        }
        let marks: Vec<(i32, Point)> = candidates.iter().enumerate().map(|(k, p)| (k as i32, *p)).collect();
        let q = OracleQuery {
            kind: QueryKind::RankCandidates,
            instruction: instruction.to_string(),
            attachments: attach(&marks),
            options: marks.iter().map(|(k, p)| OptionItem { index: *k, position: Some(*p), bearing: None }).collect(),
            want: config.picks.min(candidates.len()),
        };
        let mut it = PivotIteration { mean: mu, cov, candidates, picks: Vec::new() };
        let reply = match oracle::ask(oracle, &q, log) {
            Ok(r) => r,
            Err(e) => {
                trace.push(it);
                return Err(e.into());
            }
        };
        it.picks = reply.indices;
        let picked: Vec<Point> = it.picks.iter().map(|k| it.candidates[*k as usize]).collect();
        last = Some(picked[0]);
        mu = mean(&picked).expect("at least one pick");
        cov = clamp_eigen([[cov[0][0] * config.shrink, cov[0][1] * config.shrink], [cov[1][0] * config.shrink, cov[1][1] * config.shrink]], config.floor);
        trace.push(it);
    }
    let p = last.expect("iterations ≥ 1");
    Ok(Pose::facing(p, face))
}
