use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, LlmBackend, LlmError, ModuleCall};

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub url: String,
    pub key: Option<String>,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl LiveConfig {
    pub const DEFAULT_URL: &'static str = "https://api.openai.com/v1/chat/completions";

    /// Reads `ENGINE_LLM_URL` and `ENGINE_LLM_KEY`.
    pub fn from_env() -> Self {
        LiveConfig {
            url: std::env::var("ENGINE_LLM_URL").unwrap_or_else(|_| Self::DEFAULT_URL.to_string()),
            key: std::env::var("ENGINE_LLM_KEY").ok().filter(|k| !k.is_empty()),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Client for an OpenAI-compatible chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    config: LiveConfig,
}

enum Attempt {
    Done(String),
    Retry(LlmError),
    Fail(LlmError),
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        LiveBackend { config }
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn attempt(&self, client: &reqwest::blocking::Client, key: &str, req: &CompletionRequest) -> Attempt {
        let body = json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": req.messages,
        });
        let resp = match client
            .post(&self.config.url)
            .bearer_auth(key)
            .json(&body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(LlmError::BackendUnreachable(e.to_string())),
        };
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fail(LlmError::AuthFailure(format!("HTTP {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(LlmError::BackendUnreachable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Attempt::Fail(LlmError::BadResponse(format!("HTTP {status}: {text}")));
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fail(LlmError::BadResponse(e.to_string())),
        };
        match parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
        {
            Some(s) => Attempt::Done(s.to_string()),
            None => Attempt::Fail(LlmError::BadResponse("no choices[0].message.content".into())),
        }
    }
}

impl LlmBackend for LiveBackend {
    fn complete(&self, _call: &ModuleCall, req: &CompletionRequest) -> Result<String, LlmError> {
        req.validate()?;
        let key = self
            .config
            .key
            .as_deref()
            .ok_or_else(|| LlmError::AuthFailure("ENGINE_LLM_KEY is not set".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(self.config.timeout)
            .build()
            .map_err(|e| LlmError::BackendUnreachable(e.to_string()))?;
        let mut last = LlmError::BackendUnreachable("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&client, key, req) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    tracing::warn!(attempt, error = %e, "transient backend failure");
                    last = e;
                }
            }
        }
        Err(last)
    }

    fn name(&self) -> &'static str {
        "live"
    }
}
