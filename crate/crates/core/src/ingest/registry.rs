//! Named dataset registry persisted as a single JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::jsonl::{load_jsonl, FieldMapping, LoadOutcome};
use crate::digest::file_digest;
use crate::domain::{Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::transform::{build_copa_nli, read_copa_jsonl, NonEntailmentLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// premise / hypothesis / label objects, one per line.
    Jsonl,
    /// Choice-format records converted on load into paired NLI instances.
    CopaJsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default)]
    pub fields: FieldMapping,
    pub split: DatasetKind,
    /// Label given to the non-entailment member of each choice-format pair.
    #[serde(default)]
    pub non_entailment: NonEntailmentLabel,
    /// SHA-256 of the file contents at registration time.
    #[serde(default)]
    pub checksum: Option<String>,
}

/// Outcome of loading a registered dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryLoad {
    pub dataset: Dataset,
    pub dropped_labels: usize,
    /// The file changed since it was registered.
    pub stale: bool,
    pub checksum: String,
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<RegistryLoad> {
    let checksum = file_digest(&manifest.path)?;
    let stale = manifest.checksum.as_deref().is_some_and(|c| c != checksum);
    if stale {
        log::warn!("dataset {} changed since registration", manifest.name);
    }
    let LoadOutcome {
        dataset,
        dropped_labels,
    } = match manifest.format {
        DatasetFormat::Jsonl => load_jsonl(
            &manifest.path,
            &manifest.name,
            manifest.split,
            &manifest.fields,
        )?,
        DatasetFormat::CopaJsonl => {
            let input = read_copa_jsonl(&manifest.path)?;
            let built = build_copa_nli(&manifest.name, &input.records, manifest.non_entailment);
            let errors = input.errors.len() + built.errors.len();
            if errors > 0 {
                log::warn!(
                    "{}: {errors} malformed COPA record(s) skipped",
                    manifest.name
                );
            }
            LoadOutcome {
                dataset: Dataset {
                    kind: manifest.split,
                    ..built.dataset
                },
                dropped_labels: 0,
            }
        }
    };
    Ok(RegistryLoad {
        dataset,
        dropped_labels,
        stale,
        checksum,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub datasets: Vec<DatasetManifest>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(self)?;
        body.push(b'\n');
        fs::write(path, body)?;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DatasetManifest> {
        self.datasets.iter().find(|m| m.name == name)
    }

    /// Adds or replaces `manifest`, recording the current file checksum.
    pub fn register(&mut self, mut manifest: DatasetManifest) -> Result<()> {
        manifest.checksum = Some(file_digest(&manifest.path)?);
        match self.datasets.iter_mut().find(|m| m.name == manifest.name) {
            Some(slot) => *slot = manifest,
            None => self.datasets.push(manifest),
        }
        Ok(())
    }

    /// Names of datasets whose files no longer match their recorded checksum.
    pub fn stale(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for m in &self.datasets {
            if let Some(expected) = &m.checksum {
                if &file_digest(&m.path)? != expected {
                    out.push(m.name.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn load_named(&self, name: &str) -> Result<RegistryLoad> {
        let manifest = self
            .get(name)
            .ok_or_else(|| Error::Config(format!("dataset {name:?} is not registered")))?;
        load_dataset(manifest)
    }
}
