//! Generic HTTP client for an image+text model endpoint.
//!
//! Request (schema 1):
//! `{"schema":1,"model":..,"kind":"direction|keypoint|rank_candidates",
//!   "prompt":..,"images":[{"name":..,"mime":"image/png","data":<base64>}],
//!   "answer_schema":{"format":"ANSWER: i[, j, k]","count":n,"options":[..],"allow_none":bool}}`
//!
//! Response: `{"schema":1,"text":".."}`. The text is parsed with
//! [`parse_answer`](super::parse_answer).

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parse_answer, prompts, OracleError, OracleQuery, OracleReply, QueryKind, SemanticOracle};

pub const DEFAULT_TOKEN_ENV: &str = "BASEPLACE_ORACLE_TOKEN";

fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.to_string()
}
fn default_timeout() -> u64 {
    60_000
}
fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpOracleConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
}

#[derive(Debug, Deserialize)]
struct ResponseBody {
    schema: u32,
    text: String,
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shared client; clone freely across trials.
#[derive(Clone)]
pub struct HttpOracle {
    pub config: HttpOracleConfig,
    agent: ureq::Agent,
    token: Option<String>,
    gate: Arc<Gate>,
}

pub fn kind_tag(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Direction => "direction",
        QueryKind::Keypoint => "keypoint",
        QueryKind::RankCandidates => "rank_candidates",
    }
}

impl HttpOracle {
    pub fn new(config: HttpOracleConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let gate = Arc::new(Gate { free: Mutex::new(config.max_concurrent.max(1)), cv: Condvar::new() });
        Self { config, agent, token, gate }
    }

    pub fn request_body(&self, q: &OracleQuery) -> serde_json::Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        let images: Vec<serde_json::Value> = q
            .attachments
            .iter()
            .map(|a| json!({"name": a.name, "mime": "image/png", "data": b64.encode(a.image.to_png())}))
            .collect();
        json!({
            "schema": 1,
            "model": self.config.model,
            "kind": kind_tag(q.kind),
            "prompt": prompts::render(q),
            "images": images,
            "answer_schema": {
                "format": "ANSWER: i[, j, k]",
                "count": q.want,
                "options": q.option_indices(),
                "allow_none": q.kind == QueryKind::Direction,
            },
        })
    }
}

impl SemanticOracle for HttpOracle {
    fn answer(&mut self, q: &OracleQuery) -> Result<OracleReply, OracleError> {
        let body = self.request_body(q);
        let _permit = self.gate.acquire();
        let mut req = self.agent.post(&self.config.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| OracleError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| OracleError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(OracleError::Transport(format!("HTTP {}: {}", status.as_u16(), text.chars().take(200).collect::<String>())));
        }
        let parsed: ResponseBody = serde_json::from_str(&text).map_err(|e| OracleError::Parse(format!("response body: {e}")))?;
        if parsed.schema != 1 {
            return Err(OracleError::Parse(format!("unsupported response schema {}", parsed.schema)));
        }
        let indices = parse_answer(&parsed.text)?;
        Ok(OracleReply { indices, raw: parsed.text })
    }
}
