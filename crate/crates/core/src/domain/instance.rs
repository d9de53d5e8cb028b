use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::label::Label;
use crate::error::{Error, Result};

/// A premise/hypothesis pair with its gold label (absent when unlabelled)
/// and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliInstance {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl NliInstance {
    pub fn new(
        id: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        label: Option<Label>,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
            source: source.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// Requirements for an instance that takes part in training or evaluation.
    pub fn check_usable(&self) -> Result<()> {
        if self.premise.trim().is_empty() || self.hypothesis.trim().is_empty() {
            return Err(Error::Validation(format!(
                "instance {} has an empty premise or hypothesis",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub kind: DatasetKind,
    pub instances: Vec<NliInstance>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(
        name: impl Into<String>,
        kind: DatasetKind,
        instances: Vec<NliInstance>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate id {:?} in dataset {name}",
                    inst.id
                )));
            }
        }
        Ok(Self {
            name,
            kind,
            instances,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&NliInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn index_by_id(&self) -> BTreeMap<&str, &NliInstance> {
        self.instances.iter().map(|i| (i.id.as_str(), i)).collect()
    }

    /// Instances whose id is in `ids`, in dataset order.
    pub fn subset<'a, I>(&self, name: impl Into<String>, ids: I) -> Result<Dataset>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let wanted: HashSet<&str> = ids.into_iter().map(String::as_str).collect();
        let instances: Vec<NliInstance> = self
            .instances
            .iter()
            .filter(|i| wanted.contains(i.id.as_str()))
            .cloned()
            .collect();
        if instances.len() != wanted.len() {
            return Err(Error::Validation(format!(
                "{} requested id(s) are not in dataset {}",
                wanted.len() - instances.len(),
                self.name
            )));
        }
        Dataset::new(name, self.kind, instances)
    }

    /// Per-class counts in entailment, neutral, contradiction order; unlabelled
    /// instances are not counted.
    pub fn histogram(&self) -> [usize; 3] {
        histogram(&self.instances)
    }
}

pub fn histogram(instances: &[NliInstance]) -> [usize; 3] {
    let mut h = [0usize; 3];
    for label in instances.iter().filter_map(|i| i.label) {
        h[label.index()] += 1;
    }
    h
}
