//! Blocking chat-completions client with bounded retries and a cap on
//! concurrent requests.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use crate::backend::{BackendError, BackendErrorKind, ChatBackend, ChatOptions, Message};

pub const ENV_ENDPOINT: &str = "CTRLSEL_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "CTRLSEL_LLM_API_KEY";
pub const ENV_MODEL: &str = "CTRLSEL_LLM_MODEL";

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    /// Total attempts including the first.
    pub max_attempts: u32,
    /// Relative jitter: each delay is scaled by a uniform factor in
    /// `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 3,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Nominal delay before retry number `retry` (0-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry as i32))
    }

    /// Longest total time spent sleeping between attempts.
    pub fn max_backoff(&self) -> Duration {
        (0..self.max_attempts.saturating_sub(1))
            .map(|r| self.nominal_delay(r).mul_f64(1.0 + self.jitter))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retry: RetryPolicy::default(),
        }
    }

    /// Endpoint and key from the environment; the endpoint falls back to
    /// [`DEFAULT_ENDPOINT`].
    pub fn from_env() -> Self {
        let endpoint = std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| DEFAULT_ENDPOINT.to_string());
        let mut config = Self::new(endpoint);
        config.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        config
    }
}

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self, wait: Duration) -> Option<SlotGuard<'_>> {
        let guard = self.used.lock().unwrap_or_else(|e| e.into_inner());
        let (mut used, res) = self
            .freed
            .wait_timeout_while(guard, wait, |u| *u >= self.limit)
            .unwrap_or_else(|e| e.into_inner());
        if res.timed_out() && *used >= self.limit {
            return None;
        }
        *used += 1;
        Some(SlotGuard(self))
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    slots: Slots,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        Self {
            config,
            agent,
            slots: Slots {
                used: Mutex::new(0),
                freed: Condvar::new(),
                limit,
            },
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, body: &RequestBody<'_>, timeout: Duration) -> Result<String, BackendError> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(status_error(status, &text));
        }
        first_choice(&text)
    }
}

fn transport_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(t) => BackendError::new(
            BackendErrorKind::Timeout,
            format!("request timed out ({t})"),
        ),
        ureq::Error::Json(e) => BackendError::bad_response(e.to_string()),
        other => BackendError::new(BackendErrorKind::Transport, other.to_string()),
    }
}

fn status_error(status: u16, body: &str) -> BackendError {
    let snippet: String = body.chars().take(200).collect();
    let kind = match status {
        401 | 403 => BackendErrorKind::Auth,
        408 => BackendErrorKind::Timeout,
        429 => BackendErrorKind::RateLimited,
        500..=599 => BackendErrorKind::Transport,
        _ => BackendErrorKind::BadResponse,
    };
    BackendError::new(kind, format!("HTTP {status}: {snippet}"))
}

/// Content of `choices[0].message.content` in a chat-completions response.
pub fn first_choice(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::bad_response(format!("invalid JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::bad_response("response has no choices[0].message.content"))
}

/// POSTs one chat-completions request, retrying retryable failures with
/// exponential backoff.
pub fn http_complete(
    backend: &HttpBackend,
    messages: &[Message],
    options: &ChatOptions,
) -> Result<String, BackendError> {
    if !(0.0..=2.0).contains(&options.temperature) {
        return Err(BackendError::bad_response(format!(
            "temperature {} outside [0, 2]",
            options.temperature
        )));
    }
    let timeout = Duration::from_secs_f64(options.timeout_s.max(0.001));
    let body = RequestBody {
        model: &options.model,
        messages,
        temperature: options.temperature,
        max_tokens: options.max_tokens,
    };
    let policy = &backend.config.retry;
    let started = Instant::now();
    let _slot = backend.slots.acquire(timeout).ok_or_else(|| {
        BackendError::new(
            BackendErrorKind::Timeout,
            "no request slot became free in time",
        )
    })?;
    let mut retry = 0;
    loop {
        let remaining = timeout
            .saturating_sub(started.elapsed())
            .max(Duration::from_millis(1));
        match backend.attempt(&body, remaining) {
            Ok(text) => return Ok(text),
            Err(e) if e.retryable && retry + 1 < policy.max_attempts => {
                let j = policy.jitter.clamp(0.0, 1.0);
                let scale = if j > 0.0 {
                    rand::rng().random_range(1.0 - j..=1.0 + j)
                } else {
                    1.0
                };
                std::thread::sleep(policy.nominal_delay(retry).mul_f64(scale));
                retry += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        messages: &[Message],
        options: &ChatOptions,
    ) -> Result<String, BackendError> {
        http_complete(self, messages, options)
    }
}
