//! The iterative loop: score → sample → rank → refine, then finalize.

use serde::{Deserialize, Serialize};

use super::{draw_candidates, finalize, normalize, refine_step, resample_weighted, score_candidate, OptimizeError, OptimizerState, PlannerConfig};
use crate::gridmap::FreeSet;
use crate::oracle::{self, Attachment, Exchange, OptionItem, OracleQuery, QueryKind, SemanticOracle};
use crate::projection::AffordanceContext;
use crate::rng::Rng;
use crate::{Point, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// 1-based iteration index.
    pub t: usize,
    pub alpha: f64,
    pub sigma_s: f64,
    pub mu: Option<Point>,
    pub positions: Vec<Point>,
    pub w_geo: Vec<f64>,
    pub w_sem: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub uniform_fallback: bool,
    /// Candidate index behind each marker 0..N_sample−1.
    pub resampled: Vec<usize>,
    /// Marker indices returned by the oracle, best first.
    pub ranked: Vec<i32>,
}

impl IterationTrace {
    pub fn marker_positions(&self) -> Vec<(i32, Point)> {
        self.resampled.iter().enumerate().map(|(m, i)| (m as i32, self.positions[*i])).collect()
    }

    pub fn ranked_positions(&self) -> Vec<Point> {
        self.ranked.iter().map(|m| self.positions[self.resampled[*m as usize]]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub placement: Pose,
    pub position: Point,
}

/// Builds the images sent with a ranking query from the numbered markers.
pub type RankAttachments<'a> = &'a dyn Fn(&[(i32, Point)]) -> Vec<Attachment>;

/// Run the full loop. Iterations are appended to `trace` as they complete,
/// so a failure still leaves the partial history.
#[allow(clippy::too_many_arguments)]
pub fn optimize(
    ctx: &AffordanceContext,
    free: &FreeSet<f64>,
    instruction: &str,
    oracle: &mut dyn SemanticOracle,
    config: &PlannerConfig<f64>,
    rng: &mut Rng,
    attach: RankAttachments,
    trace: &mut Vec<IterationTrace>,
    log: &mut Vec<Exchange>,
) -> Result<OptimizeOutput, OptimizeError> {
    config.validate()?;
    let g = ctx.keypoint.ok_or_else(|| OptimizeError::Config("affordance point not set".into()))?;
    let mut state = OptimizerState::new(config);
    for t in 1..=config.iterations {
        let alpha = config.alpha_at(t);
        let positions = draw_candidates(g, free, config, rng)?;
        let scores: Vec<_> = positions.iter().map(|x| score_candidate(*x, g, state.mu, state.sigma_s, alpha, config)).collect();
        let w: Vec<f64> = scores.iter().map(|s| s.w).collect();
        let (p, uniform_fallback) = normalize(&w);
        if uniform_fallback {
            log::warn!("iteration {t}: all weights zero, resampling uniformly");
        }
        let resampled = resample_weighted(&p, config.n_sample, rng);
        let last = t == config.iterations;
        let want = if last { config.final_k } else { config.top_k };
        let markers: Vec<(i32, Point)> = resampled.iter().enumerate().map(|(m, i)| (m as i32, positions[*i])).collect();
        let query = OracleQuery {
            kind: QueryKind::RankCandidates,
            instruction: instruction.to_string(),
            attachments: attach(&markers),
            options: markers.iter().map(|(m, x)| OptionItem { index: *m, position: Some(*x), bearing: None }).collect(),
            want,
        };
        let mut it = IterationTrace {
            t,
            alpha,
            sigma_s: state.sigma_s,
            mu: state.mu,
            w_geo: scores.iter().map(|s| s.w_geo).collect(),
            w_sem: scores.iter().map(|s| s.w_sem).collect(),
            w,
            p,
            uniform_fallback,
            resampled,
            ranked: Vec::new(),
            positions,
        };
        let reply = oracle::ask(oracle, &query, log);
        let reply = match reply {
            Ok(r) => r,
            Err(e) => {
                trace.push(it);
                return Err(e.into());
            }
        };
        it.ranked = reply.indices;
        let picks = it.ranked_positions();
        trace.push(it);
        if last {
            let position = finalize(&picks);
            return Ok(OptimizeOutput { placement: Pose::facing(position, ctx.centroid), position });
        }
        state = refine_step(&picks, &state, config);
    }
    unreachable!("iterations ≥ 1 is validated")
}
