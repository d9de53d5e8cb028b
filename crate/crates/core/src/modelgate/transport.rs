use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::decode::TokenLogprob;
use super::finetune::JobState;
use crate::digest::json_digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// What a request is for. Not sent over the wire; part of the digest and
/// used by the mock provider to pick a behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Classify,
    Score,
    Generate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Ask for per-token log-likelihoods.
    pub logprobs: bool,
    pub kind: RequestKind,
    /// Distinguishes otherwise identical requests, e.g. repeated votes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
}

impl ChatRequest {
    /// Digest of the exact request, including temperature and nonce.
    pub fn digest(&self) -> String {
        json_digest(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<TokenLogprob>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transient failure: {0}")]
    Transient(String),
    /// The provider refused the request; retrying will not help.
    #[error("rejected: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRequest {
    pub base_model: String,
    pub training_file: PathBuf,
    pub training_digest: String,
    pub params: BTreeMap<String, Value>,
}

/// Provider-side view of a fine-tune job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderJob {
    pub id: String,
    pub state: JobState,
    #[serde(default)]
    pub fine_tuned_model: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

/// A hosted model endpoint. Implementations must be usable from several
/// threads at once.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;

    fn submit_finetune(&self, request: &FinetuneRequest) -> Result<ProviderJob, TransportError>;

    fn poll_finetune(&self, job_id: &str) -> Result<ProviderJob, TransportError>;
}
