//! LLM backends: a scripted mock and an OpenAI-style chat-completions adapter.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_BASE_URL: &str = "TLENS_LLM_BASE_URL";
pub const ENV_MODEL: &str = "TLENS_LLM_MODEL";
pub const ENV_API_KEY: &str = "TLENS_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    /// Worth retrying.
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("unusable backend response: {0}")]
    Response(String),
    #[error("scripted backend has no completions left")]
    Exhausted,
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait LlmBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Completion(String),
    /// Simulates a failed request.
    TransportError {
        transport_error: String,
    },
}

/// Replays a fixed list of completions, one per call, ignoring the prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    entries: VecDeque<ScriptEntry>,
    calls: usize,
}

impl ScriptedBackend {
    pub fn new(completions: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self::from_entries(completions.into_iter().map(|c| ScriptEntry::Completion(c.into())))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
            calls: 0,
        }
    }

    /// A JSON array whose items are completion strings or
    /// `{"transport_error": "..."}`.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("script: {e}")))?;
        Ok(Self::from_entries(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn remaining(&self) -> usize {
        self.entries.len()
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&mut self, _messages: &[Message]) -> Result<String, BackendError> {
        self.calls += 1;
        match self.entries.pop_front() {
            Some(ScriptEntry::Completion(c)) => Ok(c),
            Some(ScriptEntry::TransportError { transport_error }) => Err(BackendError::Transport(transport_error)),
            None => Err(BackendError::Exhausted),
        }
    }
}

/// `POST {base_url}/chat/completions` with a bearer key.
#[derive(Debug, Clone)]
pub struct ChatBackend {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl ChatBackend {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            agent,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let base = var(ENV_BASE_URL).ok_or_else(|| BackendError::Config(format!("{ENV_BASE_URL} is not set")))?;
        let model = var(ENV_MODEL).ok_or_else(|| BackendError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self::new(&base, &model, var(ENV_API_KEY), Duration::from_secs(120)))
    }
}

impl LlmBackend for ChatBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let mut req = self
            .agent
            .post(&format!("{}/chat/completions", self.base_url))
            .header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        if status >= 400 {
            return Err(BackendError::Response(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Response(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Response("no choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_replays_in_order_then_runs_dry() {
        let mut b = ScriptedBackend::from_json(r#"["one", {"transport_error": "boom"}, "two"]"#).unwrap();
        assert_eq!(b.complete(&[]).unwrap(), "one");
        assert_eq!(b.complete(&[]), Err(BackendError::Transport("boom".into())));
        assert_eq!(b.complete(&[]).unwrap(), "two");
        assert_eq!(b.complete(&[]), Err(BackendError::Exhausted));
        assert_eq!(b.calls(), 4);
    }

    #[test]
    fn bad_script_is_a_config_error() {
        assert!(matches!(ScriptedBackend::from_json("{}"), Err(BackendError::Config(_))));
        assert!(matches!(
            ScriptedBackend::from_json("[1]"),
            Err(BackendError::Config(_))
        ));
    }

    #[test]
    fn messages_serialize_as_chat_roles() {
        let m = Message::new(Role::Assistant, "hi");
        assert_eq!(
            serde_json::to_value(&m).unwrap(),
            json!({"role": "assistant", "content": "hi"})
        );
    }
}
