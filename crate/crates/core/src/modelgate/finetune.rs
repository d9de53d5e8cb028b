//! Fine-tune job records and their persisted store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::types::ModelHandle;
use crate::digest::json_digest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Submitted,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }

    /// Allowed moves: submitted -> running -> {succeeded, failed}. A job may
    /// also fail before it starts running, and staying put is always allowed.
    pub fn can_advance_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Submitted, Submitted | Running | Failed)
                | (Running, Running | Succeeded | Failed)
                | (Succeeded, Succeeded)
                | (Failed, Failed)
        )
    }
}

/// Default pass-through hyperparameters for OpenAI-style fine-tuning. They
/// are forwarded untouched and never interpreted here.
pub fn openai_default_params() -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("n_epochs".to_string(), Value::from(2)),
        ("learning_rate_multiplier".to_string(), Value::from(1.8)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneJob {
    pub job_id: String,
    pub provider: String,
    /// Model the job fine-tunes.
    pub base: ModelHandle,
    pub training_digest: String,
    pub state: JobState,
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub model: Option<ModelHandle>,
    #[serde(default)]
    pub failure_reason: Option<String>,
}

/// Key under which a job is deduplicated: same provider, base model,
/// training file and parameters means the same job.
pub fn job_key(
    provider: &str,
    base_model: &str,
    training_digest: &str,
    params: &BTreeMap<String, Value>,
) -> String {
    json_digest(&(provider, base_model, training_digest, params))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobStore {
    jobs: BTreeMap<String, FinetuneJob>,
    #[serde(skip)]
    path: Option<PathBuf>,
}

impl JobStore {
    pub fn open(path: &Path) -> Result<Self> {
        let mut store: JobStore = if path.exists() {
            serde_json::from_slice(&std::fs::read(path)?)?
        } else {
            JobStore::default()
        };
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn get(&self, key: &str) -> Option<&FinetuneJob> {
        self.jobs.get(key)
    }

    pub fn find_by_id(&self, job_id: &str) -> Option<&FinetuneJob> {
        self.jobs.values().find(|j| j.job_id == job_id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &FinetuneJob> {
        self.jobs.values()
    }

    /// Records `job`, refusing state regressions.
    pub fn upsert(&mut self, job: FinetuneJob) -> Result<()> {
        let key = job_key(
            &job.provider,
            &job.base.model,
            &job.training_digest,
            &job.params,
        );
        if let Some(current) = self.jobs.get(&key) {
            if !current.state.can_advance_to(job.state) {
                return Err(Error::Invariant(format!(
                    "job {} cannot move from {:?} to {:?}",
                    job.job_id, current.state, job.state
                )));
            }
        }
        self.jobs.insert(key, job);
        self.persist()
    }

    fn persist(&self) -> Result<()> {
        if let Some(path) = &self.path {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let mut body = serde_json::to_vec_pretty(self)?;
            body.push(b'\n');
            std::fs::write(path, body)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use JobState::*;

    #[test]
    fn transitions() {
        assert!(Submitted.can_advance_to(Running));
        assert!(Running.can_advance_to(Succeeded));
        assert!(Running.can_advance_to(Failed));
        assert!(!Running.can_advance_to(Submitted));
        assert!(!Succeeded.can_advance_to(Running));
        assert!(!Failed.can_advance_to(Succeeded));
        assert!(!Submitted.can_advance_to(Succeeded));
    }

    #[test]
    fn store_rejects_regression_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jobs.json");
        let mut store = JobStore::open(&path).unwrap();
        let job = FinetuneJob {
            job_id: "j1".into(),
            provider: "mock".into(),
            base: ModelHandle {
                provider: "mock".into(),
                model: "m".into(),
                role: super::super::types::ModelRole::Base,
                supports_probabilities: true,
                supports_finetune: true,
            },
            training_digest: "abc".into(),
            state: Running,
            params: openai_default_params(),
            model: None,
            failure_reason: None,
        };
        store.upsert(job.clone()).unwrap();
        assert!(store
            .upsert(FinetuneJob {
                state: Submitted,
                ..job.clone()
            })
            .is_err());
        let reopened = JobStore::open(&path).unwrap();
        assert_eq!(reopened.find_by_id("j1").unwrap().state, Running);
        assert_eq!(reopened.find_by_id("j1").unwrap().params["n_epochs"], 2);
    }
}
