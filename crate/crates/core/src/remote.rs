//! JSON-over-HTTP client for the inference sidecar.
//!
//! Wire contract:
//!
//! * `POST /embed`  `{"texts": [..]}` → `{"vectors": [[..]], "dim": n}`
//! * `POST /entail` `{"premise": "..", "hypotheses": [..], "normalize": bool}`
//!   → `{"probs": [..], "truncated": bool}` (`truncated` optional)
//! * `GET /health` → `{"status": "..", "model_ids": {..}, "context_limit": n}`
//!
//! Transport failures and 5xx responses are retried with bounded exponential
//! backoff. 4xx responses and malformed bodies are contract violations and are
//! never retried.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that overrides the sidecar endpoint in every remote spec.
pub const ENDPOINT_ENV: &str = "ZEROTOPIC_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailRequest {
    pub premise: String,
    pub hypotheses: Vec<String>,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailResponse {
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default)]
    pub model_ids: serde_json::Value,
    #[serde(default)]
    pub context_limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            initial_backoff_ms: 100,
            max_backoff_ms: 2_000,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(16))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Retryable(String),
    Fatal(Error),
}

#[derive(Debug)]
pub struct SidecarClient {
    endpoint: String,
    agent: ureq::Agent,
    limiter: Limiter,
    retry: RetryPolicy,
}

impl SidecarClient {
    pub fn new(endpoint: &str, max_in_flight: usize, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
            limiter: Limiter::new(max_in_flight),
            retry,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        self.call("/embed", Some(req))
    }

    pub fn entail(&self, req: &EntailRequest) -> Result<EntailResponse> {
        self.call("/entail", Some(req))
    }

    pub fn health(&self) -> Result<HealthResponse> {
        self.call::<(), _>("/health", None)
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&Req>,
    ) -> Result<Resp> {
        let url = format!("{}{}", self.endpoint, path);
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff(attempt - 1));
            }
            let outcome = {
                let _permit = self.limiter.acquire();
                self.once(&url, body)
            };
            match outcome {
                Ok(resp) => return Ok(resp),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    log::debug!("{url}: attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Transport {
            endpoint: url,
            attempts,
            message: last,
        })
    }

    fn once<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        url: &str,
        body: Option<&Req>,
    ) -> std::result::Result<Resp, Failure> {
        let sent = match body {
            Some(b) => self.agent.post(url).send_json(b),
            None => self.agent.get(url).call(),
        };
        let mut resp = sent.map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| {
                Failure::Fatal(Error::ContractViolation(format!(
                    "{url}: undecodable response body: {e}"
                )))
            }),
            500..=599 => Err(Failure::Retryable(format!("HTTP {status}: {text}"))),
            _ => Err(Failure::Fatal(Error::ContractViolation(format!(
                "{url}: HTTP {status}: {text}"
            )))),
        }
    }
}
