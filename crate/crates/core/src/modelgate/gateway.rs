//! Uniform access to a provider: prompt construction, caching, retries and
//! bounded concurrency.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cache::ResponseCache;
use super::decode::{decode_label, parse_score, probs_from_logprobs};
use super::finetune::{job_key, FinetuneJob, JobState, JobStore};
use super::templates::TemplateStore;
use super::transport::{
    ChatMessage, ChatRequest, ChatResponse, FinetuneRequest, Provider, RequestKind, TransportError,
};
use super::types::{
    ModelHandle, ModelRole, PredictionRecord, PromptConfig, ScoreDimension, ScoreOutcome,
};
use crate::digest::{file_digest, json_digest, sha256_hex};
use crate::domain::NliInstance;
use crate::error::{Error, Result};

pub const SHOTS_JSONL: &str = include_str!("../../assets/shots.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    /// Extra attempts when a score answer does not parse.
    pub score_retries: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            score_retries: 2,
        }
    }
}

/// The bundled chain-of-thought demonstrations.
pub fn default_shots() -> Vec<NliInstance> {
    SHOTS_JSONL
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled shots parse"))
        .collect()
}

pub struct Gateway {
    provider: Arc<dyn Provider>,
    cache: ResponseCache,
    templates: TemplateStore,
    shots: Vec<NliInstance>,
    config: GatewayConfig,
    transport_calls: AtomicU64,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.id())
            .field("config", &self.config)
            .field("transport_calls", &self.transport_calls())
            .finish()
    }
}

impl Gateway {
    pub fn new(
        provider: Arc<dyn Provider>,
        cache: ResponseCache,
        config: GatewayConfig,
    ) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_in_flight.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build request pool: {e}")))?;
        Ok(Self {
            provider,
            cache,
            templates: TemplateStore::default(),
            shots: default_shots(),
            config,
            transport_calls: AtomicU64::new(0),
            pool,
        })
    }

    pub fn with_templates(mut self, templates: TemplateStore) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_shots(mut self, shots: Vec<NliInstance>) -> Self {
        self.shots = shots;
        self
    }

    pub fn templates(&self) -> &TemplateStore {
        &self.templates
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    /// Number of calls that reached the provider, retries included.
    pub fn transport_calls(&self) -> u64 {
        self.transport_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Runs `f` over `items` with at most `max_in_flight` calls at once.
    /// Output order matches input order.
    pub fn map_bounded<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    fn call_with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, TransportError>,
    ) -> Result<T> {
        let mut attempt = 0u32;
        loop {
            self.transport_calls.fetch_add(1, Ordering::SeqCst);
            match call() {
                Ok(v) => return Ok(v),
                Err(TransportError::Rejected(msg)) => {
                    return Err(Error::Gateway(format!(
                        "{} rejected the request: {msg}",
                        self.provider.id()
                    )))
                }
                Err(e) if attempt < self.config.retry.max_retries => {
                    let delay = self.config.retry.base_delay * 2u32.pow(attempt);
                    log::debug!("{}: {e}; retrying in {delay:?}", self.provider.id());
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Gateway(format!(
                        "{} failed after {} attempt(s): {e}",
                        self.provider.id(),
                        attempt + 1
                    )))
                }
            }
        }
    }

    /// Sends `request` unless an identical one (same model, request digest
    /// and prompt config) is cached. Returns the response and request digest.
    fn execute(&self, request: &ChatRequest, cfg: &PromptConfig) -> Result<(ChatResponse, String)> {
        let prompt_hash = request.digest();
        let key = sha256_hex(format!(
            "{}\n{}\n{}",
            request.model,
            prompt_hash,
            json_digest(cfg)
        ));
        if let Some(hit) = self.cache.get(&key) {
            return Ok((hit, prompt_hash));
        }
        let response = self.call_with_retries(|| self.provider.complete(request))?;
        let stored = self.cache.insert(&key, response)?;
        Ok((stored, prompt_hash))
    }

    pub fn classification_prompt(
        &self,
        instance: &NliInstance,
        cfg: &PromptConfig,
    ) -> Result<String> {
        if cfg.n_shots > self.shots.len() {
            return Err(Error::Config(format!(
                "{} shots requested but only {} demonstrations are available",
                cfg.n_shots,
                self.shots.len()
            )));
        }
        let mut examples = String::new();
        for shot in &self.shots[..cfg.n_shots] {
            let reasoning = match (cfg.chain_of_thought, shot.meta.get("rationale")) {
                (true, Some(r)) => self
                    .templates
                    .render("shot_reasoning", &[("rationale", r)])?,
                _ => String::new(),
            };
            let label = shot.label.map(|l| l.as_str()).unwrap_or("");
            examples.push_str(&self.templates.render(
                "shot",
                &[
                    ("premise", &shot.premise),
                    ("hypothesis", &shot.hypothesis),
                    ("reasoning", &reasoning),
                    ("label", label),
                ],
            )?);
        }
        let answer_format = self
            .templates
            .get(if cfg.chain_of_thought {
                "answer_cot"
            } else {
                "answer_direct"
            })?
            .trim_end();
        self.templates.render(
            &cfg.template_id,
            &[
                ("examples", &examples),
                ("premise", &instance.premise),
                ("hypothesis", &instance.hypothesis),
                ("answer_format", answer_format),
            ],
        )
    }

    pub fn classify(
        &self,
        handle: &ModelHandle,
        instance: &NliInstance,
        cfg: &PromptConfig,
    ) -> Result<PredictionRecord> {
        self.classify_with_nonce(handle, instance, cfg, None)
    }

    /// Classification with a nonce folded into the request digest so that
    /// repeated votes are not collapsed by the cache.
    pub fn classify_with_nonce(
        &self,
        handle: &ModelHandle,
        instance: &NliInstance,
        cfg: &PromptConfig,
        nonce: Option<&str>,
    ) -> Result<PredictionRecord> {
        instance.check_usable()?;
        let prompt = self.classification_prompt(instance, cfg)?;
        let request = ChatRequest {
            model: handle.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: cfg.temperature,
            logprobs: handle.supports_probabilities,
            kind: RequestKind::Classify,
            nonce: nonce.map(str::to_string),
        };
        let (response, prompt_hash) = self.execute(&request, cfg)?;
        let probs = if handle.supports_probabilities {
            response.logprobs.as_deref().and_then(probs_from_logprobs)
        } else {
            None
        };
        let record = PredictionRecord {
            instance_id: instance.id.clone(),
            decoded: decode_label(&response.content),
            probs,
            raw: response.content,
            prompt_hash,
        };
        record.check()?;
        Ok(record)
    }

    pub fn classify_batch(
        &self,
        handle: &ModelHandle,
        instances: &[NliInstance],
        cfg: &PromptConfig,
    ) -> Vec<Result<PredictionRecord>> {
        self.map_bounded(instances, |inst| self.classify(handle, inst, cfg))
    }

    /// One prompt per dimension; an answer that is not an integer in 1..=10
    /// is retried with a fresh nonce, and after the retry budget the instance
    /// is reported unscorable.
    pub fn score_instance(
        &self,
        handle: &ModelHandle,
        instance: &NliInstance,
        dimensions: &[ScoreDimension],
    ) -> Result<ScoreOutcome> {
        if dimensions.is_empty() {
            return Err(Error::Config("no score dimensions requested".into()));
        }
        let cfg = PromptConfig {
            n_shots: 0,
            chain_of_thought: false,
            template_id: "score".into(),
            temperature: 0.0,
        };
        let label = instance.label.map(|l| l.as_str()).unwrap_or("unlabelled");
        let mut scores = std::collections::BTreeMap::new();
        for &dim in dimensions {
            let prompt = self.templates.render(
                &dim.template_id(),
                &[
                    ("premise", &instance.premise),
                    ("hypothesis", &instance.hypothesis),
                    ("label", label),
                ],
            )?;
            let mut last_raw = String::new();
            let mut parsed = None;
            for attempt in 0..=self.config.score_retries {
                let request = ChatRequest {
                    model: handle.model.clone(),
                    messages: vec![ChatMessage::user(prompt.clone())],
                    temperature: cfg.temperature,
                    logprobs: false,
                    kind: RequestKind::Score,
                    nonce: (attempt > 0).then(|| format!("retry:{attempt}")),
                };
                let (response, _) = self.execute(&request, &cfg)?;
                parsed = parse_score(&response.content);
                last_raw = response.content;
                if parsed.is_some() {
                    break;
                }
            }
            match parsed {
                Some(score) => {
                    scores.insert(dim, score);
                }
                None => {
                    return Ok(ScoreOutcome::Unscorable {
                        dimension: dim,
                        raw: last_raw,
                    })
                }
            }
        }
        Ok(ScoreOutcome::Scored { scores })
    }

    pub fn generate(
        &self,
        handle: &ModelHandle,
        prompt: &str,
        cfg: &PromptConfig,
        nonce: Option<&str>,
    ) -> Result<String> {
        let request = ChatRequest {
            model: handle.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: cfg.temperature,
            logprobs: false,
            kind: RequestKind::Generate,
            nonce: nonce.map(str::to_string),
        };
        Ok(self.execute(&request, cfg)?.0.content)
    }

    /// Submits a fine-tune job for an exported training file. Resubmitting
    /// the same file, base model and parameters returns the recorded job.
    pub fn submit_finetune(
        &self,
        store: &mut JobStore,
        handle: &ModelHandle,
        training_file: &Path,
        expected_digest: &str,
        params: &std::collections::BTreeMap<String, Value>,
    ) -> Result<FinetuneJob> {
        if !handle.supports_finetune {
            return Err(Error::Capability(format!(
                "model {} cannot be fine-tuned",
                handle.model
            )));
        }
        let actual = file_digest(training_file)?;
        if actual != expected_digest {
            return Err(Error::Validation(format!(
                "training file {} digest {actual} does not match export digest {expected_digest}",
                training_file.display()
            )));
        }
        let key = job_key(self.provider.id(), &handle.model, expected_digest, params);
        if let Some(job) = store.get(&key) {
            return Ok(job.clone());
        }
        let request = FinetuneRequest {
            base_model: handle.model.clone(),
            training_file: training_file.to_path_buf(),
            training_digest: expected_digest.to_string(),
            params: params.clone(),
        };
        let remote = self.call_with_retries(|| self.provider.submit_finetune(&request))?;
        let mut job = FinetuneJob {
            job_id: remote.id.clone(),
            provider: self.provider.id().to_string(),
            base: handle.clone(),
            training_digest: expected_digest.to_string(),
            state: JobState::Submitted,
            params: params.clone(),
            model: None,
            failure_reason: None,
        };
        self.apply_remote(&mut job, remote);
        store.upsert(job.clone())?;
        Ok(job)
    }

    /// Refreshes a job from the provider. Terminal jobs are returned as-is
    /// without contacting the provider; state never moves backwards.
    pub fn poll_finetune(&self, store: &mut JobStore, job: &FinetuneJob) -> Result<FinetuneJob> {
        if job.state.is_terminal() {
            return Ok(job.clone());
        }
        let remote = self.call_with_retries(|| self.provider.poll_finetune(&job.job_id))?;
        let mut next = job.clone();
        if next.state == JobState::Submitted && remote.state == JobState::Succeeded {
            next.state = JobState::Running;
            store.upsert(next.clone())?;
        }
        self.apply_remote(&mut next, remote);
        store.upsert(next.clone())?;
        Ok(next)
    }

    /// Polls until the job is terminal or `max_polls` is reached.
    pub fn wait_finetune(
        &self,
        store: &mut JobStore,
        job: &FinetuneJob,
        max_polls: usize,
        interval: Duration,
    ) -> Result<FinetuneJob> {
        let mut job = job.clone();
        for _ in 0..max_polls {
            if job.state.is_terminal() {
                break;
            }
            job = self.poll_finetune(store, &job)?;
            if !job.state.is_terminal() && !interval.is_zero() {
                std::thread::sleep(interval);
            }
        }
        Ok(job)
    }

    fn apply_remote(&self, job: &mut FinetuneJob, remote: super::transport::ProviderJob) {
        if job.state.can_advance_to(remote.state) {
            job.state = remote.state;
        } else {
            log::warn!(
                "job {}: ignoring provider state {:?} after {:?}",
                job.job_id,
                remote.state,
                job.state
            );
        }
        if job.state == JobState::Succeeded && job.model.is_none() {
            let model = remote
                .fine_tuned_model
                .unwrap_or_else(|| format!("ft:{}:{}", job.base.model, job.job_id));
            job.model = Some(ModelHandle {
                provider: job.provider.clone(),
                model,
                role: ModelRole::FineTuned,
                supports_probabilities: job.base.supports_probabilities,
                supports_finetune: false,
            });
        }
        if job.state == JobState::Failed {
            job.failure_reason = remote
                .error
                .or_else(|| Some("provider reported failure".into()));
        }
    }
}
