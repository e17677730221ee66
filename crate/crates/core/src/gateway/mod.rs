//! Uniform access to text and vision model backends.
//!
//! Every call is addressed by a [`ReplayKey`]. In [`GatewayMode::Replay`] the
//! gateway answers only from fixture files and never touches a backend; in
//! [`GatewayMode::Record`] it calls the backend and persists each response as
//! a fixture; [`GatewayMode::Live`] calls the backend without recording.
//!
//! Logits are fetched for answer tokens at the first generated position.
//! Backends report values keyed by their own surface forms (`" Yes"`,
//! `"ĠYes"`, ...); the gateway maps them back to the canonical target through
//! a configurable list of surface forms per target.

mod http;
mod log;
mod replay;
mod request;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::http::OpenAiCompatBackend;
pub use self::log::{now_ms, LogRecord, RequestLog};
pub use self::replay::{Fixture, FixtureResponse, FixtureStore};
pub use self::request::{ImageAttachment, ModelRequest, Operation, ReplayKey, Role, Sampling};

use crate::sync::Limiter;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no fixture for {role} request {key} (fixture set is incomplete)")]
    FixtureMiss { role: Role, key: ReplayKey },
    #[error("backend cannot expose token logits: {0}")]
    LogitsUnsupported(String),
    #[error("backend returned unusable content: {0}")]
    Content(String),
    #[error("fixture storage failure: {0}")]
    StorageFailure(String),
}

/// Errors a backend implementation reports. Only `Transport` is retried.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("content error: {0}")]
    Content(String),
    #[error("logits not supported")]
    LogitsUnsupported,
}

/// How a backend exposes first-position token scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogitCapability {
    /// Raw pre-softmax logits (local model).
    Raw,
    /// Top-k log-probabilities only; these stand in for logits.
    LogProbs,
    None,
}

/// Provenance of a logit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogitMode {
    Raw,
    LogProb,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError>;

    /// Scores at the first generated position for each requested surface form
    /// the backend can report. Missing entries are allowed.
    fn token_logits(
        &self,
        req: &ModelRequest,
        surfaces: &[String],
    ) -> Result<BTreeMap<String, f64>, BackendError>;

    fn logit_capability(&self) -> LogitCapability;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogits {
    pub values: BTreeMap<String, f64>,
    pub mode: LogitMode,
    /// Targets absent from a top-k log-probability list, assigned the
    /// smallest reported value.
    pub floored: Vec<String>,
}

impl TokenLogits {
    pub fn get(&self, target: &str) -> Option<f64> {
        self.values.get(target).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 250 }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << attempt.min(16)))
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub fixtures_dir: PathBuf,
    pub concurrency: usize,
    pub max_images: usize,
    pub retry: RetryPolicy,
    /// Surface forms tried, in order, for each canonical target.
    pub surfaces: BTreeMap<String, Vec<String>>,
    pub log_path: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            mode: GatewayMode::Replay,
            fixtures_dir: PathBuf::from("fixtures"),
            concurrency: 4,
            max_images: 64,
            retry: RetryPolicy::default(),
            surfaces: BTreeMap::new(),
            log_path: None,
        }
    }
}

/// Surface forms for a target when none are configured: the bare string,
/// then the space-prefixed, byte-BPE and sentencepiece spellings.
pub fn default_surfaces(target: &str) -> Vec<String> {
    vec![
        target.to_string(),
        format!(" {target}"),
        format!("\u{0120}{target}"),
        format!("\u{2581}{target}"),
    ]
}

pub struct Gateway {
    config: GatewayConfig,
    mode: RwLock<GatewayMode>,
    backend: Option<Arc<dyn Backend>>,
    store: FixtureStore,
    limiter: Limiter,
    log: Option<RequestLog>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode())
            .field("backend", &self.backend.as_ref().map(|b| b.name().to_string()))
            .field("fixtures", &self.store.dir())
            .finish()
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig, backend: Option<Arc<dyn Backend>>) -> Result<Self, GatewayError> {
        let log = match &config.log_path {
            Some(p) => Some(RequestLog::open(p).map_err(|e| GatewayError::StorageFailure(e.to_string()))?),
            None => None,
        };
        Ok(Self {
            mode: RwLock::new(config.mode),
            store: FixtureStore::new(config.fixtures_dir.clone()),
            limiter: Limiter::new(config.concurrency),
            backend,
            log,
            config,
        })
    }

    /// A replay-only gateway over a fixture directory.
    pub fn replay(fixtures_dir: impl Into<PathBuf>) -> Self {
        let config = GatewayConfig {
            mode: GatewayMode::Replay,
            fixtures_dir: fixtures_dir.into(),
            ..GatewayConfig::default()
        };
        Self::new(config, None).expect("no log file to open")
    }

    pub fn mode(&self) -> GatewayMode {
        *self.mode.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Switches between replay and the configured live mode.
    pub fn replay_mode(&self, on: bool) {
        let mut mode = self.mode.write().unwrap_or_else(|e| e.into_inner());
        *mode = if on {
            GatewayMode::Replay
        } else if self.config.mode == GatewayMode::Replay {
            GatewayMode::Live
        } else {
            self.config.mode
        };
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }

    pub fn max_images(&self) -> usize {
        self.config.max_images
    }

    /// Persists a response as a fixture for `req`.
    pub fn record(&self, op: Operation, req: &ModelRequest, response: FixtureResponse) -> Result<PathBuf, GatewayError> {
        self.store
            .put(&Fixture::new(op, req, response))
            .map_err(|e| GatewayError::StorageFailure(e.to_string()))
    }

    pub fn complete(&self, req: &ModelRequest) -> Result<String, GatewayError> {
        req.validate(self.config.max_images).map_err(GatewayError::InvalidRequest)?;
        let key = ReplayKey::new(Operation::Completion, req);
        let started = Instant::now();
        let result = match self.mode() {
            GatewayMode::Replay => self.lookup(&key, req).and_then(|f| match f.response {
                FixtureResponse::Text(t) => Ok((t, 0)),
                FixtureResponse::Logits { .. } | FixtureResponse::LogitsUnsupported(_) => Err(GatewayError::StorageFailure(format!(
                    "fixture {key} holds logits, expected a completion"
                ))),
            }),
            mode => {
                let backend = self.backend()?;
                let out = self.with_retries(|| backend.complete(req));
                if let (Ok((text, _)), GatewayMode::Record) = (&out, mode) {
                    self.record(Operation::Completion, req, FixtureResponse::Text(text.clone()))?;
                }
                out
            }
        };
        self.log_call(Operation::Completion, req, &key, started, &result);
        result.map(|(t, _)| t)
    }

    pub fn logits_for_tokens(&self, req: &ModelRequest, targets: &[String]) -> Result<TokenLogits, GatewayError> {
        if targets.is_empty() {
            return Err(GatewayError::InvalidRequest("no target tokens".into()));
        }
        let mut req = req.clone();
        req.targets = targets.to_vec();
        req.validate(self.config.max_images).map_err(GatewayError::InvalidRequest)?;
        let key = ReplayKey::new(Operation::Logits, &req);
        let started = Instant::now();
        let raw = match self.mode() {
            GatewayMode::Replay => self.lookup(&key, &req).and_then(|f| match f.response {
                FixtureResponse::Logits { mode, values } => Ok(((mode, values), 0)),
                FixtureResponse::LogitsUnsupported(who) => Err(GatewayError::LogitsUnsupported(who)),
                FixtureResponse::Text(_) => Err(GatewayError::StorageFailure(format!(
                    "fixture {key} holds a completion, expected logits"
                ))),
            }),
            mode => {
                let backend = self.backend()?;
                let out = match backend.logit_capability() {
                    LogitCapability::None => Err(GatewayError::LogitsUnsupported(backend.name().to_string())),
                    capability => {
                        let logit_mode = if capability == LogitCapability::Raw { LogitMode::Raw } else { LogitMode::LogProb };
                        let surfaces: Vec<String> = targets.iter().flat_map(|t| self.surfaces(t)).collect();
                        self.with_retries(|| backend.token_logits(&req, &surfaces))
                            .map(|(values, attempts)| ((logit_mode, values), attempts))
                    }
                };
                if mode == GatewayMode::Record {
                    match &out {
                        Ok(((m, values), _)) => {
                            self.record(Operation::Logits, &req, FixtureResponse::Logits { mode: *m, values: values.clone() })?;
                        }
                        Err(GatewayError::LogitsUnsupported(who)) => {
                            self.record(Operation::Logits, &req, FixtureResponse::LogitsUnsupported(who.clone()))?;
                        }
                        Err(_) => {}
                    }
                }
                out
            }
        };
        self.log_call(Operation::Logits, &req, &key, started, &raw);
        let ((mode, values), _) = raw?;
        self.resolve(targets, mode, &values)
    }

    /// Maps backend surface forms back to canonical targets.
    fn resolve(&self, targets: &[String], mode: LogitMode, raw: &BTreeMap<String, f64>) -> Result<TokenLogits, GatewayError> {
        let mut values = BTreeMap::new();
        let mut missing = Vec::new();
        for target in targets {
            match self.surfaces(target).iter().find_map(|s| raw.get(s)) {
                Some(&v) if v.is_finite() => {
                    values.insert(target.clone(), v);
                }
                Some(v) => return Err(GatewayError::Content(format!("non-finite logit {v} for {target:?}"))),
                None => missing.push(target.clone()),
            }
        }
        if !missing.is_empty() {
            let floor = raw.values().copied().filter(|v| v.is_finite()).reduce(f64::min);
            match (mode, floor) {
                (LogitMode::LogProb, Some(floor)) => {
                    for t in &missing {
                        values.insert(t.clone(), floor);
                    }
                }
                _ => {
                    return Err(GatewayError::Content(format!("no score for target tokens {missing:?}")));
                }
            }
        }
        Ok(TokenLogits { values, mode, floored: missing })
    }

    fn surfaces(&self, target: &str) -> Vec<String> {
        self.config
            .surfaces
            .get(target)
            .cloned()
            .unwrap_or_else(|| default_surfaces(target))
    }

    fn backend(&self) -> Result<&Arc<dyn Backend>, GatewayError> {
        self.backend
            .as_ref()
            .ok_or_else(|| GatewayError::BackendUnavailable("no backend configured".into()))
    }

    fn lookup(&self, key: &ReplayKey, req: &ModelRequest) -> Result<Fixture, GatewayError> {
        match self.store.get(key) {
            Ok(Some(f)) => Ok(f),
            Ok(None) => Err(GatewayError::FixtureMiss { role: req.role, key: key.clone() }),
            Err(e) => Err(GatewayError::StorageFailure(e.to_string())),
        }
    }

    /// Runs `call` under the concurrency limiter, retrying transport errors
    /// with exponential backoff. Returns the value and the attempt count.
    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, BackendError>) -> Result<(T, u32), GatewayError> {
        let _permit = self.limiter.acquire();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(v) => return Ok((v, attempt)),
                Err(BackendError::Transport(msg)) if attempt <= self.config.retry.max_retries => {
                    tracing::warn!(attempt, error = %msg, "transport error, retrying");
                    std::thread::sleep(self.config.retry.delay(attempt - 1));
                }
                Err(BackendError::Transport(msg)) => return Err(GatewayError::BackendUnavailable(msg)),
                Err(BackendError::Content(msg)) => return Err(GatewayError::Content(msg)),
                Err(BackendError::LogitsUnsupported) => {
                    return Err(GatewayError::LogitsUnsupported("backend rejected logit request".into()))
                }
            }
        }
    }

    fn log_call<T>(&self, op: Operation, req: &ModelRequest, key: &ReplayKey, started: Instant, result: &Result<(T, u32), GatewayError>) {
        let Some(log) = &self.log else { return };
        let source = if self.mode() == GatewayMode::Replay { "replay" } else { "backend" };
        log.append(&LogRecord {
            ts_ms: log::now_ms(),
            op,
            role: req.role,
            model: &req.model,
            key: key.as_str(),
            source,
            ok: result.is_ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
            attempts: result.as_ref().map(|(_, a)| *a).unwrap_or(0),
            latency_ms: started.elapsed().as_millis(),
        });
    }
}

#[cfg(test)]
mod tests;
