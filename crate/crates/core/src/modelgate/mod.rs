//! Gateway to hosted language models: few-shot classification with optional
//! class probabilities, instance scoring, free-text generation and fine-tune
//! job lifecycle, over a content-addressed response cache.

mod cache;
mod decode;
mod finetune;
mod gateway;
mod mock;
mod openai;
mod templates;
mod transport;
mod types;

pub use cache::ResponseCache;
pub use decode::{decode_label, parse_score, probs_from_logprobs, TokenLogprob, TopLogprob};
pub use finetune::{job_key, openai_default_params, FinetuneJob, JobState, JobStore};
pub use gateway::{default_shots, Gateway, GatewayConfig, RetryPolicy};
pub use mock::{classification_response, last_user, text, FinetuneScript, MockProvider, Responder};
pub use openai::OpenAiCompatible;
pub use templates::TemplateStore;
pub use transport::{
    ChatMessage, ChatRequest, ChatResponse, FinetuneRequest, Provider, ProviderJob, RequestKind,
    TransportError,
};
pub use types::{
    Decoded, ModelHandle, ModelRole, PredictionRecord, PromptConfig, ScoreDimension, ScoreOutcome,
};
