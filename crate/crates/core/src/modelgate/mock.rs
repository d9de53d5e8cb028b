//! Deterministic offline provider. Every response is a pure function of the
//! provider seed and the request digest.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use sha2::{Digest, Sha256};

use super::decode::{TokenLogprob, TopLogprob};
use super::finetune::JobState;
use super::transport::{
    ChatRequest, ChatResponse, FinetuneRequest, Provider, ProviderJob, RequestKind, TransportError,
};
use crate::digest::json_digest;
use crate::domain::Label;

pub type Responder =
    dyn Fn(&ChatRequest, &mut ChaCha8Rng) -> Result<ChatResponse, TransportError> + Send + Sync;

/// How mock fine-tune jobs progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinetuneScript {
    /// Polls needed to reach a terminal state; the first poll reports running.
    pub polls_to_finish: usize,
    /// `Some(reason)` makes jobs end in failure.
    pub failure: Option<String>,
    /// `Some(message)` makes submission itself be rejected.
    pub reject_submit: Option<String>,
}

impl Default for FinetuneScript {
    fn default() -> Self {
        Self {
            polls_to_finish: 2,
            failure: None,
            reject_submit: None,
        }
    }
}

pub struct MockProvider {
    id: String,
    seed: u64,
    responder: Box<Responder>,
    finetune: FinetuneScript,
    polls: Mutex<HashMap<String, usize>>,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockProvider")
            .field("id", &self.id)
            .field("seed", &self.seed)
            .finish()
    }
}

impl MockProvider {
    pub fn from_fn<F>(seed: u64, responder: F) -> Self
    where
        F: Fn(&ChatRequest, &mut ChaCha8Rng) -> Result<ChatResponse, TransportError>
            + Send
            + Sync
            + 'static,
    {
        Self {
            id: "mock".into(),
            seed,
            responder: Box::new(responder),
            finetune: FinetuneScript::default(),
            polls: Mutex::new(HashMap::new()),
        }
    }

    /// Simulated NLI model: random class distributions for classification,
    /// random 1..=10 scores, and short well-formed sentences for generation.
    pub fn nli(seed: u64) -> Self {
        Self::from_fn(seed, |req, rng| {
            Ok(match req.kind {
                RequestKind::Classify => {
                    let raw: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(Exp1) + 1e-9);
                    let total: f64 = raw.iter().sum();
                    classification_response(req, raw.map(|x| x / total))
                }
                RequestKind::Score => text(rng.random_range(1..=10u8).to_string()),
                RequestKind::Generate => {
                    let sentences = if last_user(req).contains("four sentences") {
                        4
                    } else {
                        1
                    };
                    text(mock_sentences(rng, sentences))
                }
            })
        })
    }

    /// Classification always answers with the given distribution.
    pub fn fixed_probs(seed: u64, probs: [f64; 3]) -> Self {
        Self::from_fn(seed, move |req, _| Ok(classification_response(req, probs)))
    }

    /// Returns the prompt verbatim.
    pub fn echo() -> Self {
        Self::from_fn(0, |req, _| Ok(text(last_user(req).to_string())))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_finetune_script(mut self, script: FinetuneScript) -> Self {
        self.finetune = script;
        self
    }

    fn rng_for(&self, request: &ChatRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(request.digest().as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

pub fn text(content: impl Into<String>) -> ChatResponse {
    ChatResponse {
        content: content.into(),
        logprobs: None,
    }
}

pub fn last_user(req: &ChatRequest) -> &str {
    req.messages
        .iter()
        .rev()
        .find(|m| m.role == "user")
        .map_or("", |m| m.content.as_str())
}

/// Answer text plus, when requested, label-token log-likelihoods carrying `probs`.
pub fn classification_response(req: &ChatRequest, probs: [f64; 3]) -> ChatResponse {
    let best = (0..3)
        .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
        .unwrap_or(0);
    let label = Label::from_index(best).unwrap_or(Label::Entailment);
    let content = if last_user(req).contains("reasoning") {
        format!("Comparing the two statements.\nAnswer: {label}")
    } else {
        label.to_string()
    };
    let logprobs = req.logprobs.then(|| {
        let top = Label::ALL
            .iter()
            .map(|l| TopLogprob {
                token: format!(" {l}"),
                logprob: probs[l.index()].ln(),
            })
            .collect();
        vec![
            TokenLogprob {
                token: "Answer".into(),
                logprob: 0.0,
                top_logprobs: vec![],
            },
            TokenLogprob {
                token: ":".into(),
                logprob: 0.0,
                top_logprobs: vec![],
            },
            TokenLogprob {
                token: format!(" {label}"),
                logprob: probs[best].ln(),
                top_logprobs: top,
            },
        ]
    });
    ChatResponse { content, logprobs }
}

const SUBJECTS: &[&str] = &[
    "the engineer",
    "a farmer",
    "the old captain",
    "a young musician",
    "the committee",
    "a tourist",
    "the librarian",
    "a small dog",
    "the mayor",
    "a student",
];
const VERBS: &[&str] = &[
    "repaired",
    "visited",
    "described",
    "painted",
    "ignored",
    "studied",
    "carried",
    "praised",
    "opened",
    "measured",
];
const OBJECTS: &[&str] = &[
    "the wooden bridge",
    "a quiet garden",
    "the harbour wall",
    "an ancient map",
    "the new railway",
    "a broken radio",
    "the village square",
    "a detailed report",
    "the morning market",
    "a tall tower",
];
const TAILS: &[&str] = &[
    "before noon",
    "after the storm",
    "with great care",
    "for the first time",
    "in the rain",
    "last winter",
    "without any help",
    "during the festival",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

fn mock_sentences(rng: &mut ChaCha8Rng, count: usize) -> String {
    (0..count)
        .map(|_| {
            let pick =
                |rng: &mut ChaCha8Rng, xs: &[&'static str]| xs[rng.random_range(0..xs.len())];
            let s = format!(
                "{} {} {} {}.",
                pick(rng, SUBJECTS),
                pick(rng, VERBS),
                pick(rng, OBJECTS),
                pick(rng, TAILS)
            );
            capitalize(&s)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let mut rng = self.rng_for(request);
        (self.responder)(request, &mut rng)
    }

    fn submit_finetune(&self, request: &FinetuneRequest) -> Result<ProviderJob, TransportError> {
        if let Some(msg) = &self.finetune.reject_submit {
            return Err(TransportError::Rejected(msg.clone()));
        }
        let key = json_digest(&(
            &request.base_model,
            &request.training_digest,
            &request.params,
        ));
        let id = format!("ftjob-{}", &key[..16]);
        self.polls.lock().expect("poll lock").insert(id.clone(), 0);
        Ok(ProviderJob {
            id,
            state: JobState::Submitted,
            fine_tuned_model: None,
            error: None,
        })
    }

    fn poll_finetune(&self, job_id: &str) -> Result<ProviderJob, TransportError> {
        let mut polls = self.polls.lock().expect("poll lock");
        let count = polls.entry(job_id.to_string()).or_insert(0);
        *count += 1;
        let finished = *count >= self.finetune.polls_to_finish;
        let (state, model, error) = match (finished, &self.finetune.failure) {
            (false, _) => (JobState::Running, None, None),
            (true, None) => (JobState::Succeeded, Some(format!("ft:mock:{job_id}")), None),
            (true, Some(reason)) => (JobState::Failed, None, Some(reason.clone())),
        };
        Ok(ProviderJob {
            id: job_id.to_string(),
            state,
            fine_tuned_model: model,
            error,
        })
    }
}
