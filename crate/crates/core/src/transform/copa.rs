//! Conversion of two-choice cause/effect records into paired NLI instances.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, DatasetKind, Label, NliInstance};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopaQuestion {
    Cause,
    Effect,
}

impl CopaQuestion {
    fn as_str(self) -> &'static str {
        match self {
            CopaQuestion::Cause => "cause",
            CopaQuestion::Effect => "effect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopaRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub premise: String,
    pub choice1: String,
    pub choice2: String,
    pub question: CopaQuestion,
    /// 1-based index of the correct choice.
    #[serde(alias = "label-index", alias = "most-plausible-alternative")]
    pub label: u8,
}

impl CopaRecord {
    fn check(&self) -> std::result::Result<(), String> {
        if self.choice1.trim().is_empty() || self.choice2.trim().is_empty() {
            return Err("empty choice".into());
        }
        if self.premise.trim().is_empty() {
            return Err("empty premise".into());
        }
        if !matches!(self.label, 1 | 2) {
            return Err(format!("correct choice index {} is not 1 or 2", self.label));
        }
        Ok(())
    }
}

/// 3-class label used for the non-entailment member of each pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonEntailmentLabel {
    #[default]
    Neutral,
    Contradiction,
}

impl NonEntailmentLabel {
    pub fn label(self) -> Label {
        match self {
            NonEntailmentLabel::Neutral => Label::Neutral,
            NonEntailmentLabel::Contradiction => Label::Contradiction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// Zero-based record position (line number minus one for file input).
    pub index: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "record {}: {}", self.index, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopaInput {
    pub records: Vec<CopaRecord>,
    pub errors: Vec<RecordError>,
}

/// Reads choice-format JSONL; lines that do not decode are reported and skipped.
pub fn read_copa_jsonl(path: &Path) -> Result<CopaInput> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut index = 0;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CopaRecord>(&line) {
            Ok(mut rec) => {
                rec.id.get_or_insert_with(|| format!("copa:{index}"));
                records.push(rec);
            }
            Err(e) => errors.push(RecordError {
                index,
                message: e.to_string(),
            }),
        }
        index += 1;
    }
    Ok(CopaInput { records, errors })
}

pub fn copa_hypothesis(question: CopaQuestion, first: &str, second: &str) -> String {
    format!(
        "\"{first}\" is a more likely {} of this than \"{second}\"",
        question.as_str()
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopaBuild {
    pub dataset: Dataset,
    pub errors: Vec<RecordError>,
}

/// Emits two instances per record: choices in the given order (`#fwd`) and
/// swapped (`#swap`). Exactly one of the pair is entailment.
pub fn build_copa_nli(
    name: &str,
    records: &[CopaRecord],
    non_entailment: NonEntailmentLabel,
) -> CopaBuild {
    let mut instances = Vec::with_capacity(records.len() * 2);
    let mut errors = Vec::new();
    for (index, rec) in records.iter().enumerate() {
        if let Err(message) = rec.check() {
            errors.push(RecordError { index, message });
            continue;
        }
        let id = rec.id.clone().unwrap_or_else(|| format!("{name}:{index}"));
        let label_for = |first_slot: u8| {
            if rec.label == first_slot {
                Label::Entailment
            } else {
                non_entailment.label()
            }
        };
        let variants = [
            ("fwd", &rec.choice1, &rec.choice2, label_for(1)),
            ("swap", &rec.choice2, &rec.choice1, label_for(2)),
        ];
        for (suffix, first, second, label) in variants {
            instances.push(
                NliInstance::new(
                    format!("{id}#{suffix}"),
                    rec.premise.clone(),
                    copa_hypothesis(rec.question, first, second),
                    Some(label),
                    name,
                )
                .with_meta("label_space", "binary")
                .with_meta("copa_record", id.clone()),
            );
        }
    }
    let dataset = match Dataset::new(name, DatasetKind::Eval, instances) {
        Ok(d) => d,
        Err(e) => {
            // Only duplicate record ids can fail here; report and keep the first.
            errors.push(RecordError {
                index: records.len(),
                message: e.to_string(),
            });
            let mut seen = std::collections::HashSet::new();
            let unique = records
                .iter()
                .filter(|r| seen.insert(r.id.clone()))
                .cloned()
                .collect::<Vec<_>>();
            return CopaBuild {
                errors,
                ..build_copa_nli(name, &unique, non_entailment)
            };
        }
    };
    CopaBuild { dataset, errors }
}
