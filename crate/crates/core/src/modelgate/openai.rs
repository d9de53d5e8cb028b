//! Adapter for hosted providers that speak the OpenAI chat-completions and
//! fine-tuning HTTP API.
//!
//! Class probabilities come from `logprobs`/`top_logprobs` on the first
//! generated token that begins a label word (see [`super::probs_from_logprobs`]).

use std::time::Duration;

use reqwest::blocking::{multipart, Client, Response};
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use super::decode::TokenLogprob;
use super::finetune::JobState;
use super::transport::{
    ChatRequest, ChatResponse, FinetuneRequest, Provider, ProviderJob, TransportError,
};
use crate::error::{Error, Result};

const TOP_LOGPROBS: u8 = 5;

#[derive(Debug)]
pub struct OpenAiCompatible {
    id: String,
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

impl OpenAiCompatible {
    /// `api_key_env` names the environment variable holding the credential.
    pub fn new(id: impl Into<String>, base_url: &str, api_key_env: Option<&str>) -> Result<Self> {
        let api_key = match api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            id: id.into(),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url, path.trim_start_matches('/'))
    }

    fn authorized(
        &self,
        rb: reqwest::blocking::RequestBuilder,
    ) -> reqwest::blocking::RequestBuilder {
        match &self.api_key {
            Some(key) => rb.bearer_auth(key),
            None => rb,
        }
    }

    fn read_json(
        &self,
        result: reqwest::Result<Response>,
    ) -> std::result::Result<Value, TransportError> {
        let response = result.map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(TransportError::RateLimited(error_message(&body)));
        }
        if status.is_server_error() {
            return Err(TransportError::Transient(format!(
                "{status}: {}",
                error_message(&body)
            )));
        }
        if !status.is_success() {
            return Err(TransportError::Rejected(format!(
                "{status}: {}",
                error_message(&body)
            )));
        }
        serde_json::from_str(&body)
            .map_err(|e| TransportError::Rejected(format!("malformed response: {e}")))
    }
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/message")
                .and_then(Value::as_str)
                .map(str::to_string)
        })
        .unwrap_or_else(|| body.chars().take(500).collect())
}

/// Request body for `POST /chat/completions`.
pub(crate) fn chat_body(request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": request.messages,
        "temperature": request.temperature,
    });
    if request.logprobs {
        body["logprobs"] = json!(true);
        body["top_logprobs"] = json!(TOP_LOGPROBS);
    }
    body
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Option<Vec<TokenLogprob>>,
}

pub(crate) fn parse_completion(body: Value) -> std::result::Result<ChatResponse, TransportError> {
    let completion: Completion = serde_json::from_value(body)
        .map_err(|e| TransportError::Rejected(format!("malformed completion: {e}")))?;
    let choice = completion
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| TransportError::Rejected("completion has no choices".into()))?;
    Ok(ChatResponse {
        content: choice.message.content.unwrap_or_default(),
        logprobs: choice.logprobs.and_then(|l| l.content),
    })
}

pub(crate) fn parse_job(body: &Value) -> std::result::Result<ProviderJob, TransportError> {
    let id = body["id"]
        .as_str()
        .ok_or_else(|| TransportError::Rejected("fine-tune job without id".into()))?
        .to_string();
    let state = match body["status"].as_str().unwrap_or("") {
        "validating_files" | "queued" => JobState::Submitted,
        "running" => JobState::Running,
        "succeeded" => JobState::Succeeded,
        "failed" | "cancelled" => JobState::Failed,
        other => {
            return Err(TransportError::Rejected(format!(
                "unknown job status {other:?}"
            )))
        }
    };
    Ok(ProviderJob {
        id,
        state,
        fine_tuned_model: body["fine_tuned_model"].as_str().map(str::to_string),
        error: body
            .pointer("/error/message")
            .and_then(Value::as_str)
            .map(str::to_string),
    })
}

impl Provider for OpenAiCompatible {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, TransportError> {
        let rb = self
            .client
            .post(self.url("chat/completions"))
            .json(&chat_body(request));
        parse_completion(self.read_json(self.authorized(rb).send())?)
    }

    fn submit_finetune(
        &self,
        request: &FinetuneRequest,
    ) -> std::result::Result<ProviderJob, TransportError> {
        let form = multipart::Form::new()
            .text("purpose", "fine-tune")
            .file("file", &request.training_file)
            .map_err(|e| TransportError::Rejected(format!("cannot read training file: {e}")))?;
        let rb = self.client.post(self.url("files")).multipart(form);
        let uploaded = self.read_json(self.authorized(rb).send())?;
        let file_id = uploaded["id"]
            .as_str()
            .ok_or_else(|| TransportError::Rejected("file upload returned no id".into()))?;
        let body = finetune_body(&request.base_model, file_id, &request.params);
        let rb = self.client.post(self.url("fine_tuning/jobs")).json(&body);
        parse_job(&self.read_json(self.authorized(rb).send())?)
    }

    fn poll_finetune(&self, job_id: &str) -> std::result::Result<ProviderJob, TransportError> {
        let rb = self
            .client
            .get(self.url(&format!("fine_tuning/jobs/{job_id}")));
        parse_job(&self.read_json(self.authorized(rb).send())?)
    }
}

/// Job-level keys travel at the top of the request; everything else is a
/// hyperparameter.
const JOB_LEVEL_KEYS: [&str; 3] = ["seed", "suffix", "validation_file"];

fn finetune_body(
    model: &str,
    file_id: &str,
    params: &std::collections::BTreeMap<String, Value>,
) -> Value {
    let mut body = json!({ "model": model, "training_file": file_id });
    let mut hyper = serde_json::Map::new();
    for (k, v) in params {
        if JOB_LEVEL_KEYS.contains(&k.as_str()) {
            body[k] = v.clone();
        } else {
            hyper.insert(k.clone(), v.clone());
        }
    }
    if !hyper.is_empty() {
        body["hyperparameters"] = Value::Object(hyper);
    }
    body
}
