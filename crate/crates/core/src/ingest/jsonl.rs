//! JSON Lines corpus reading and writing.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{Dataset, DatasetKind, Label, NliInstance};
use crate::error::{Error, Result};

/// Field names used to pull an instance out of one JSON object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
    pub id: String,
    pub genre: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self {
            premise: "premise".into(),
            hypothesis: "hypothesis".into(),
            label: "label".into(),
            id: "id".into(),
            genre: "genre".into(),
        }
    }
}

/// Result of reading one corpus file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    /// Records skipped because their label marks annotator disagreement.
    pub dropped_labels: usize,
}

enum RawLabel {
    Known(Label),
    Missing,
    Drop,
}

/// Label normalization for source corpora. Accepts the label words in any
/// case, single-letter aliases, and the 0/1/2 integer convention; `-` and
/// `-1` mark records without a gold label and are dropped.
fn normalize_label(value: Option<&Value>) -> std::result::Result<RawLabel, String> {
    let value = match value {
        None | Some(Value::Null) => return Ok(RawLabel::Missing),
        Some(v) => v,
    };
    match value {
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "e" => Ok(RawLabel::Known(Label::Entailment)),
            "neutral" | "n" => Ok(RawLabel::Known(Label::Neutral)),
            "contradiction" | "c" => Ok(RawLabel::Known(Label::Contradiction)),
            "0" => Ok(RawLabel::Known(Label::Entailment)),
            "1" => Ok(RawLabel::Known(Label::Neutral)),
            "2" => Ok(RawLabel::Known(Label::Contradiction)),
            "-" | "-1" => Ok(RawLabel::Drop),
            _ => Err(format!("unknown label {s:?}")),
        },
        Value::Number(n) => match n.as_i64() {
            Some(-1) => Ok(RawLabel::Drop),
            Some(i) if (0..3).contains(&i) => {
                Ok(RawLabel::Known(Label::from_index(i as usize).unwrap()))
            }
            _ => Err(format!("unknown label {n}")),
        },
        other => Err(format!("unsupported label value {other}")),
    }
}

fn text_field(
    obj: &serde_json::Map<String, Value>,
    key: &str,
) -> std::result::Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(format!("field {key:?} is not a string: {other}")),
        None => Err(format!("missing field {key:?}")),
    }
}

/// Reads a JSON Lines corpus. Records without an id get `<name>:<index>`,
/// where index counts non-blank records from zero.
pub fn load_jsonl(
    path: &Path,
    name: &str,
    kind: DatasetKind,
    fields: &FieldMapping,
) -> Result<LoadOutcome> {
    let reader = BufReader::new(File::open(path)?);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    let mut dropped_labels = 0;
    let mut record_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let index = record_index;
        record_index += 1;

        let value: Value =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err(lineno, "expected a JSON object".into()))?;

        let label =
            match normalize_label(obj.get(&fields.label)).map_err(|m| parse_err(lineno, m))? {
                RawLabel::Drop => {
                    dropped_labels += 1;
                    continue;
                }
                RawLabel::Known(l) => Some(l),
                RawLabel::Missing => None,
            };

        let premise = text_field(obj, &fields.premise).map_err(|m| parse_err(lineno, m))?;
        let hypothesis = text_field(obj, &fields.hypothesis).map_err(|m| parse_err(lineno, m))?;
        let id = match obj.get(&fields.id) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(other) => return Err(parse_err(lineno, format!("unsupported id value {other}"))),
            None => format!("{name}:{index}"),
        };
        if !seen.insert(id.clone()) {
            return Err(parse_err(lineno, format!("duplicate id {id:?}")));
        }

        let source = match obj.get("source") {
            Some(Value::String(s)) => s.clone(),
            _ => name.to_string(),
        };
        let mut meta = BTreeMap::new();
        if let Some(Value::Object(m)) = obj.get("meta") {
            for (k, v) in m {
                let v = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                meta.insert(k.clone(), v);
            }
        }
        if let Some(Value::String(g)) = obj.get(&fields.genre) {
            meta.insert("genre".into(), g.clone());
        }

        instances.push(NliInstance {
            id,
            premise,
            hypothesis,
            label,
            source,
            meta,
        });
    }

    Ok(LoadOutcome {
        dataset: Dataset::new(name, kind, instances)?,
        dropped_labels,
    })
}

/// Serializes instances one per line, LF terminated.
pub fn write_instances<W: Write>(mut out: W, instances: &[NliInstance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_instances(BufWriter::new(File::create(path)?), &dataset.instances)
}
