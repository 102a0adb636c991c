//! Ground-truth oracle with a configurable corruption rate.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{OracleError, OracleQuery, OracleReply, QueryKind, SemanticOracle, NONE};
use crate::geom::{normalize_angle, Vec2};
use crate::rng::{self, Rng};
use crate::Point;

/// How much of the projected guidance the oracle gets to see.
///
/// Without the full overlay the oracle's notion of the right side drifts:
/// its fan is rotated by a per-trial offset drawn from ±15° (no arrows) or
/// ±60° (no fan); with no projection at all the fan is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CueLevel {
    #[default]
    Full,
    No12Arrows,
    NoDirectionA,
    None,
}

impl CueLevel {
    pub fn max_offset(self) -> f64 {
        match self {
            CueLevel::Full | CueLevel::None => 0.0,
            CueLevel::No12Arrows => 15f64.to_radians(),
            CueLevel::NoDirectionA => 60f64.to_radians(),
        }
    }

    pub fn shows_arrows(self) -> bool {
        matches!(self, CueLevel::Full | CueLevel::NoDirectionA)
    }

    pub fn shows_fan(self) -> bool {
        self == CueLevel::Full
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOracleConfig {
    pub noise_epsilon: f64,
    pub seed: u64,
    pub fan_bonus: f64,
    pub distance_penalty: f64,
    #[serde(default)]
    pub cue: CueLevel,
}

impl Default for ScriptedOracleConfig {
    fn default() -> Self {
        Self { noise_epsilon: 0.05, seed: 0, fan_bonus: 10.0, distance_penalty: 1.0, cue: CueLevel::Full }
    }
}

/// What the evaluator knows about the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub object_center: Point,
    pub keypoint: Point,
    pub direction: f64,
    pub half_angle: f64,
}

impl GroundTruth {
    pub fn in_fan(&self, p: Point, direction: f64) -> bool {
        let v = p - self.object_center;
        v.norm_sq() > 0.0 && v.angle_between(Vec2::from_angle(direction)) <= self.half_angle + 1e-9
    }
}

pub struct ScriptedOracle {
    pub config: ScriptedOracleConfig,
    pub truth: GroundTruth,
    fan_direction: f64,
    rng: Rng,
}

pub const CORRUPTED: &str = "scripted:corrupted";
pub const CLEAN: &str = "scripted";

impl ScriptedOracle {
    pub fn new(config: ScriptedOracleConfig, truth: GroundTruth) -> Self {
        assert!((0.0..1.0).contains(&config.noise_epsilon), "noise_epsilon must lie in [0, 1)");
        let max = config.cue.max_offset();
        let offset = if max > 0.0 { rng::stream(config.seed, "oracle-cue").random_range(-max..=max) } else { 0.0 };
        Self {
            config,
            truth,
            fan_direction: normalize_angle(truth.direction + offset),
            rng: rng::stream(config.seed, "oracle"),
        }
    }

    /// Hidden ranking utility.
    pub fn utility(&self, p: Point) -> f64 {
        let bonus = if self.config.cue != CueLevel::None && self.truth.in_fan(p, self.fan_direction) {
            self.config.fan_bonus
        } else {
            0.0
        };
        bonus - self.config.distance_penalty * p.dist(self.truth.keypoint)
    }

    fn corrupt(&mut self) -> bool {
        self.config.noise_epsilon > 0.0 && self.rng.random_bool(self.config.noise_epsilon)
    }

    fn pick_uniform(&mut self, pool: &[i32]) -> i32 {
        pool[self.rng.random_range(0..pool.len())]
    }
}

fn argmin_by(options: &[(i32, f64)]) -> i32 {
    let mut best = options[0];
    for o in &options[1..] {
        if o.1 < best.1 {
            best = *o;
        }
    }
    best.0
}

impl SemanticOracle for ScriptedOracle {
    fn answer(&mut self, q: &OracleQuery) -> Result<OracleReply, OracleError> {
        if q.options.is_empty() {
            return Err(OracleError::Invalid("query has no options".into()));
        }
        let ids = q.option_indices();
        let reply = |indices: Vec<i32>, bad: bool| OracleReply { indices, raw: if bad { CORRUPTED } else { CLEAN }.to_string() };
        match q.kind {
            QueryKind::Direction => {
                if self.corrupt() {
                    let mut pool = ids.clone();
                    pool.push(NONE);
                    return Ok(reply(vec![self.pick_uniform(&pool)], true));
                }
                let scored: Vec<(i32, f64)> = q
                    .options
                    .iter()
                    .map(|o| {
                        let b = o.bearing.ok_or_else(|| OracleError::Invalid("direction option without bearing".into()))?;
                        Ok((o.index, normalize_angle(b - self.truth.direction).abs()))
                    })
                    .collect::<Result<_, OracleError>>()?;
                Ok(reply(vec![argmin_by(&scored)], false))
            }
            QueryKind::Keypoint => {
                if self.corrupt() {
                    return Ok(reply(vec![self.pick_uniform(&ids)], true));
                }
                let scored: Vec<(i32, f64)> = q
                    .options
                    .iter()
                    .map(|o| {
                        let p = o.position.ok_or_else(|| OracleError::Invalid("keypoint option without position".into()))?;
                        Ok((o.index, p.dist(self.truth.keypoint)))
                    })
                    .collect::<Result<_, OracleError>>()?;
                Ok(reply(vec![argmin_by(&scored)], false))
            }
            QueryKind::RankCandidates => {
                let mut scored: Vec<(i32, f64)> = q
                    .options
                    .iter()
                    .map(|o| {
                        let p = o.position.ok_or_else(|| OracleError::Invalid("candidate without position".into()))?;
                        Ok((o.index, self.utility(p)))
                    })
                    .collect::<Result<_, OracleError>>()?;
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let mut order: Vec<i32> = scored.into_iter().map(|s| s.0).collect();
                let mut bad = false;
                for k in 0..order.len().saturating_sub(1) {
                    if self.corrupt() {
                        order.swap(k, k + 1);
                        bad = true;
                    }
                }
                order.truncate(q.want);
                Ok(reply(order, bad))
            }
        }
    }
}
