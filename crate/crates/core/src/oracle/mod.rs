//! Semantic oracle contract: direction choice, keypoint choice, and
//! candidate ranking.

pub mod http;
pub mod prompts;
pub mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RgbImage;
use crate::Point;

pub use scripted::{CueLevel, GroundTruth, ScriptedOracle, ScriptedOracleConfig};

/// Answer token for "uncertain / none of the above".
pub const NONE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    Direction,
    Keypoint,
    RankCandidates,
}

/// One selectable item. Geometry is carried for evaluators that reason
/// over ground truth; an image-based oracle only sees the index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionItem {
    pub index: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point>,
    /// World bearing for direction options, radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub name: String,
    pub image: RgbImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleQuery {
    pub kind: QueryKind,
    pub instruction: String,
    pub attachments: Vec<Attachment>,
    pub options: Vec<OptionItem>,
    pub want: usize,
}

impl OracleQuery {
    pub fn option_indices(&self) -> Vec<i32> {
        self.options.iter().map(|o| o.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReply {
    /// Best first.
    pub indices: Vec<i32>,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("unparseable reply: {0}")]
    Parse(String),
    #[error("invalid reply: {0}")]
    Invalid(String),
}

pub trait SemanticOracle: Send {
    fn answer(&mut self, query: &OracleQuery) -> Result<OracleReply, OracleError>;
}

/// One request/response pair as kept in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub kind: QueryKind,
    pub want: usize,
    pub options: usize,
    pub attempt: u32,
    pub indices: Vec<i32>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Check a reply against the query's options and requested count.
pub fn validate(query: &QueryKind, want: usize, options: &[i32], reply: &OracleReply) -> Result<(), OracleError> {
    let idx = &reply.indices;
    if *query == QueryKind::Direction && idx.len() == 1 && idx[0] == NONE {
        return Ok(());
    }
    if idx.len() != want {
        return Err(OracleError::Invalid(format!("expected {want} indices, got {}", idx.len())));
    }
    for (k, i) in idx.iter().enumerate() {
        if !options.contains(i) {
            return Err(OracleError::Invalid(format!("index {i} is not an option")));
        }
        if idx[..k].contains(i) {
            return Err(OracleError::Invalid(format!("index {i} repeated")));
        }
    }
    Ok(())
}

/// Ask with validation, retrying once on an invalid or failed reply.
pub fn ask(oracle: &mut dyn SemanticOracle, query: &OracleQuery, log: &mut Vec<Exchange>) -> Result<OracleReply, OracleError> {
    let options = query.option_indices();
    let mut last = OracleError::Invalid("no attempt".into());
    for attempt in 0..2 {
        let result = oracle
            .answer(query)
            .and_then(|r| validate(&query.kind, query.want, &options, &r).map(|_| r));
        match result {
            Ok(r) => {
                log.push(Exchange {
                    kind: query.kind,
                    want: query.want,
                    options: options.len(),
                    attempt,
                    indices: r.indices.clone(),
                    raw: r.raw.clone(),
                    error: None,
                });
                return Ok(r);
            }
            Err(e) => {
                log.push(Exchange {
                    kind: query.kind,
                    want: query.want,
                    options: options.len(),
                    attempt,
                    indices: Vec::new(),
                    raw: String::new(),
                    error: Some(e.to_string()),
                });
                last = e;
            }
        }
    }
    Err(last)
}

/// Strict mode of three direction answers; `None` means abort.
pub fn majority_vote(replies: [i32; 3]) -> Option<i32> {
    let [a, b, c] = replies;
    let mode = if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        return None;
    };
    (mode != NONE).then_some(mode)
}

/// Parse the last `ANSWER: ...` line of a free-text reply.
pub fn parse_answer(text: &str) -> Result<Vec<i32>, OracleError> {
    let line = text
        .lines()
        .rev()
        .find_map(|l| {
            let t = l.trim().trim_start_matches(['*', '#', ' ']);
            let up = t.get(..7)?;
            up.eq_ignore_ascii_case("ANSWER:").then(|| t[7..].trim().to_string())
        })
        .ok_or_else(|| OracleError::Parse("no `ANSWER:` line".into()))?;
    let body = line.trim_matches(|c: char| matches!(c, '[' | ']' | '.' | '*') || c.is_whitespace());
    if body.eq_ignore_ascii_case("none") || body.eq_ignore_ascii_case("uncertain") {
        return Ok(vec![NONE]);
    }
    body.split(',')
        .map(|s| s.trim().parse::<i32>().map_err(|_| OracleError::Parse(format!("bad index `{}`", s.trim()))))
        .collect()
}
