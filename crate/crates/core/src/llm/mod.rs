//! Chat-completion backends behind one contract.

mod live;
mod mock;

pub use live::{LiveBackend, LiveConfig};
pub use mock::MockBackend;

use serde::{Deserialize, Serialize};

use crate::session::Role;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("language model backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("no fixture `{module}-{index}`")]
    FixtureExhausted { module: String, index: usize },
    #[error("backend rejected credentials: {0}")]
    AuthFailure(String),
    #[error("backend returned an unusable response: {0}")]
    BadResponse(String),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::BackendUnreachable(_) => "backend-unreachable",
            LlmError::FixtureExhausted { .. } => "fixture-exhausted",
            LlmError::AuthFailure(_) => "auth-failure",
            LlmError::BadResponse(_) => "bad-backend-response",
            LlmError::InvalidRequest(_) => "invalid-request",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => return Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(LlmError::InvalidRequest("first message must be the system message".into()))
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Which module is calling and how many exchanges its session already holds.
/// `module` is `central` or the element's name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModuleCall {
    pub module: String,
    pub sequence: usize,
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, call: &ModuleCall, req: &CompletionRequest) -> Result<String, LlmError>;

    fn name(&self) -> &'static str;
}
