//! Run manifest: one record per executed stage with input and output digests.

use std::collections::BTreeMap;
use std::path::Path;

use nlicurate::digest::file_digest;
use nlicurate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Succeeded,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    /// Input name to digest, including the relevant configuration fragment.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the run directory, to digest.
    pub outputs: BTreeMap<String, String>,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub transport_calls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_digest: String,
    pub stages: BTreeMap<String, StageRecord>,
    pub usage: Usage,
}

impl RunManifest {
    pub fn load_or_new(path: &Path, run_id: &str, config_digest: &str) -> Result<Self> {
        let mut manifest = if path.exists() {
            serde_json::from_slice(&std::fs::read(path)?)?
        } else {
            RunManifest::default()
        };
        manifest.run_id = run_id.to_string();
        manifest.config_digest = config_digest.to_string();
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(self)?;
        body.push(b'\n');
        std::fs::write(path, body)?;
        Ok(())
    }

    /// The stage can be skipped: it last completed with the same inputs and
    /// every recorded output still matches its digest.
    pub fn is_fresh(
        &self,
        stage: &str,
        inputs: &BTreeMap<String, String>,
        run_dir: &Path,
        outputs: &[String],
    ) -> bool {
        let Some(rec) = self.stages.get(stage) else {
            return false;
        };
        if rec.status == StageStatus::Failed || &rec.inputs != inputs {
            return false;
        }
        if outputs.iter().any(|o| !rec.outputs.contains_key(o)) {
            return false;
        }
        rec.outputs
            .iter()
            .all(|(rel, digest)| file_digest(&run_dir.join(rel)).is_ok_and(|d| &d == digest))
    }

    pub fn statuses(&self) -> impl Iterator<Item = (&str, StageStatus)> {
        self.stages.values().map(|r| (r.stage.as_str(), r.status))
    }
}
