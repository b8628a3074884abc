//! Remote model client for candidate generation.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Candidate, CandidateSet, CandidateSource, DecomposeError};
use crate::linker::RankedSchema;

const PROMPT_TEMPLATE: &str = include_str!("../../resources/prompt_v1.txt");

/// Version tag of the bundled prompt template.
pub const PROMPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

/// Anything that can turn a prompt into ranked pipeline texts.
pub trait RemoteModelClient: Send + Sync {
    fn generate(&self, prompt: &str, beam_size: usize) -> Result<Vec<Candidate>, RemoteError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub beam_size: usize,
    /// Extra attempts after a transport failure.
    pub retry_budget: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: String::new(),
            api_key_env: "DATAMATE_API_KEY".into(),
            timeout_ms: 10_000,
            beam_size: super::DEFAULT_BEAM,
            retry_budget: 1,
        }
    }
}

/// Fills the versioned prompt template. The schema is embedded in rank order.
pub fn build_prompt(question: &str, ranked: &RankedSchema) -> String {
    let body: String = PROMPT_TEMPLATE
        .lines()
        .filter(|l| !l.starts_with("# prompt-version"))
        .map(|l| format!("{l}\n"))
        .collect();
    body.replace("{schema}", &ranked.serialized.text)
        .replace("{question}", question.trim())
}

/// Asks the client for candidates, retrying transport failures within the
/// budget. Protocol errors are returned immediately.
pub fn decompose_remote(
    question: &str,
    ranked: &RankedSchema,
    client: &dyn RemoteModelClient,
    beam_size: usize,
    retry_budget: u32,
) -> Result<CandidateSet, DecomposeError> {
    let prompt = build_prompt(question, ranked);
    let mut attempt = 0;
    let candidates = loop {
        match client.generate(&prompt, beam_size) {
            Ok(c) => break c,
            Err(RemoteError::Transport(e)) if attempt < retry_budget => {
                attempt += 1;
                tracing::warn!(attempt, error = %e, "remote model call failed, retrying");
            }
            Err(RemoteError::Transport(e)) => return Err(DecomposeError::Transport(e)),
            Err(RemoteError::Protocol(e)) => return Err(DecomposeError::Protocol(e)),
        }
    };
    let mut candidates: Vec<Candidate> = candidates.into_iter().take(beam_size).collect();
    // stable: equal scores keep the model's order
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(CandidateSet {
        candidates,
        source: CandidateSource::Remote,
    })
}

#[cfg_attr(not(feature = "remote"), allow(dead_code))]
#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    beam_size: usize,
    format: &'static str,
}

#[derive(Deserialize)]
struct WireResponse {
    candidates: Vec<WireCandidate>,
}

#[derive(Deserialize)]
struct WireCandidate {
    text: String,
    #[serde(default)]
    score: Option<f64>,
}

/// Parses the `{"candidates": [{"text", "score"}]}` response body.
pub fn parse_response(body: &str) -> Result<Vec<Candidate>, RemoteError> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| RemoteError::Protocol(e.to_string()))?;
    let n = wire.candidates.len();
    Ok(wire
        .candidates
        .into_iter()
        .enumerate()
        .map(|(i, c)| Candidate {
            text: c.text,
            // Missing scores keep the listed order.
            score: c.score.unwrap_or((n - i) as f64 / n as f64),
        })
        .collect())
}

/// JSON-over-HTTP client: POSTs `{prompt, beam_size, format}` to the endpoint.
#[cfg(feature = "remote")]
pub struct HttpModelClient {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[cfg(feature = "remote")]
impl HttpModelClient {
    pub fn new(config: &RemoteConfig) -> Result<Self, RemoteError> {
        if config.endpoint.is_empty() {
            return Err(RemoteError::Transport("no endpoint configured".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        Ok(HttpModelClient {
            endpoint: config.endpoint.clone(),
            api_key: std::env::var(&config.api_key_env).ok(),
            client,
        })
    }
}

#[cfg(feature = "remote")]
impl RemoteModelClient for HttpModelClient {
    fn generate(&self, prompt: &str, beam_size: usize) -> Result<Vec<Candidate>, RemoteError> {
        let mut req = self.client.post(&self.endpoint).json(&WireRequest {
            prompt,
            beam_size,
            format: "qdmr-text/1",
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        if status.is_server_error() {
            return Err(RemoteError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(RemoteError::Protocol(format!("HTTP {status}: {body}")));
        }
        parse_response(&body)
    }
}

/// Timeout helper for clients that are not HTTP based.
pub fn timeout_of(config: &RemoteConfig) -> Duration {
    Duration::from_millis(config.timeout_ms)
}
