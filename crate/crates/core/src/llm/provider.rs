//! Chat providers: an OpenAI-compatible HTTP client and a scripted provider
//! that replays replies from files.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatMessage, Role};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("authentication")]
    Authentication,
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("cannot read reply {path}: {message}")]
    Io { path: String, message: String },
}

pub trait ChatProvider: Send {
    /// Sends the whole conversation and returns the assistant's reply.
    fn send(&mut self, messages: &[ChatMessage]) -> Result<ChatMessage, ProviderError>;
}

/// Replays `reply-001.md`, `reply-002.md`, ... from a directory.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    dir: PathBuf,
    next: usize,
    /// Every conversation passed to `send`, in order.
    pub requests: Vec<Vec<ChatMessage>>,
}

impl ScriptedProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ScriptedProvider {
            dir: dir.into(),
            next: 1,
            requests: Vec::new(),
        }
    }

    pub fn reply_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("reply-{index:03}.md"))
    }

    pub fn replies_used(&self) -> usize {
        self.next - 1
    }
}

impl ChatProvider for ScriptedProvider {
    fn send(&mut self, messages: &[ChatMessage]) -> Result<ChatMessage, ProviderError> {
        self.requests.push(messages.to_vec());
        let path = Self::reply_path(&self.dir, self.next);
        if !path.exists() {
            return Err(ProviderError::ScriptExhausted);
        }
        let content = std::fs::read_to_string(&path).map_err(|e| ProviderError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.next += 1;
        Ok(ChatMessage::assistant(&content))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenAiConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub token: Option<String>,
    pub timeout_secs: u64,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        OpenAiConfig {
            base_url: "https://api.openai.com".to_string(),
            model: "gpt-4o".to_string(),
            temperature: 0.2,
            token: None,
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub struct OpenAiProvider {
    config: OpenAiConfig,
    agent: ureq::Agent,
}

impl OpenAiProvider {
    pub fn new(config: OpenAiConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        OpenAiProvider { config, agent }
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }
}

impl ChatProvider for OpenAiProvider {
    fn send(&mut self, messages: &[ChatMessage]) -> Result<ChatMessage, ProviderError> {
        let body = serde_json::to_string(&CompletionRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages,
        })
        .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let mut request = self
            .agent
            .post(&self.endpoint())
            .header("Content-Type", "application/json");
        if let Some(token) = &self.config.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send(body.as_bytes())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status == 401 {
            return Err(ProviderError::Authentication);
        }
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status { status, body: text });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                ProviderError::Malformed("missing choices[0].message.content".to_string())
            })?;
        Ok(ChatMessage {
            role: Role::Assistant,
            content,
        })
    }
}
