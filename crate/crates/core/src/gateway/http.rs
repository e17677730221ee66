//! OpenAI-compatible chat-completions backend.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{Backend, BackendError, LogitCapability, ModelRequest};

pub const ENV_API_BASE: &str = "DEMOFORGE_API_BASE";
pub const ENV_API_KEY: &str = "DEMOFORGE_API_KEY";

const TOP_LOGPROBS: u32 = 20;

#[derive(Debug)]
pub struct OpenAiCompatBackend {
    base_url: String,
    api_key: Option<String>,
    capability: LogitCapability,
    client: reqwest::blocking::Client,
}

impl OpenAiCompatBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, capability: LogitCapability, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            capability,
            client,
        })
    }

    /// Reads the endpoint and key from `DEMOFORGE_API_BASE` / `DEMOFORGE_API_KEY`.
    pub fn from_env(capability: LogitCapability, timeout: Duration) -> Result<Self, BackendError> {
        let base = std::env::var(ENV_API_BASE)
            .map_err(|_| BackendError::Transport(format!("{ENV_API_BASE} is not set")))?;
        Self::new(base, std::env::var(ENV_API_KEY).ok(), capability, timeout)
    }

    fn body(req: &ModelRequest, max_tokens: u32) -> Value {
        let mut content = vec![json!({ "type": "text", "text": req.prompt })];
        for image in &req.images {
            let b64 = base64::engine::general_purpose::STANDARD.encode(image.data());
            content.push(json!({
                "type": "image_url",
                "image_url": { "url": format!("data:{};base64,{b64}", image.media_type) }
            }));
        }
        let mut body = json!({
            "model": req.model,
            "messages": [{ "role": "user", "content": content }],
            "temperature": req.sampling.temperature,
            "max_tokens": max_tokens,
        });
        if let Some(seed) = req.sampling.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let mut call = self.client.post(format!("{}/chat/completions", self.base_url)).json(body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Content(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Content(format!("malformed response: {e}")))
    }
}

impl Backend for OpenAiCompatBackend {
    fn name(&self) -> &str {
        &self.base_url
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError> {
        let resp = self.post(&Self::body(req, req.sampling.max_tokens))?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Content("response has no message content".into()))
    }

    fn token_logits(&self, req: &ModelRequest, _surfaces: &[String]) -> Result<BTreeMap<String, f64>, BackendError> {
        if self.capability == LogitCapability::None {
            return Err(BackendError::LogitsUnsupported);
        }
        let mut body = Self::body(req, 1);
        body["logprobs"] = json!(true);
        body["top_logprobs"] = json!(TOP_LOGPROBS);
        let resp = self.post(&body)?;
        let top = resp["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
            .as_array()
            .ok_or(BackendError::LogitsUnsupported)?;
        let mut out = BTreeMap::new();
        for entry in top {
            if let (Some(tok), Some(lp)) = (entry["token"].as_str(), entry["logprob"].as_f64()) {
                out.entry(tok.to_string()).or_insert(lp);
            }
        }
        Ok(out)
    }

    fn logit_capability(&self) -> LogitCapability {
        self.capability
    }
}
