//! Prompt templates kept as editable text. Placeholders are `{name}`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

macro_rules! bundled {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../../assets/templates/", $id, ".txt")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled![
    "classify_few_shot",
    "classify_finetuned",
    "shot",
    "shot_reasoning",
    "answer_cot",
    "answer_direct",
    "score_correctness",
    "score_difficulty",
    "score_plausibility",
    "score_fluency",
    "premise",
    "hyp_simple_entailment",
    "hyp_simple_neutral",
    "hyp_simple_contradiction",
    "hyp_complex_contradiction_1",
    "hyp_complex_contradiction_2",
    "hyp_complex_neutral_1",
    "hyp_complex_neutral_2",
    "hyp_complex_entailment_1",
    "hyp_complex_entailment_2",
];

#[derive(Debug, Clone)]
pub struct TemplateStore {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateStore {
    fn default() -> Self {
        Self {
            templates: BUNDLED
                .iter()
                .map(|(id, body)| (id.to_string(), body.to_string()))
                .collect(),
        }
    }
}

impl TemplateStore {
    /// Bundled templates overridden (or extended) by every `*.txt` in `dir`;
    /// the file stem is the template id.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut store = Self::default();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    store.insert(stem, std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, id: impl Into<String>, body: impl Into<String>) {
        self.templates.insert(id.into(), body.into());
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Result<&str> {
        self.templates
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("unknown template {id:?}")))
    }

    /// Substitutes `{key}` for each pair. Placeholders without a value are
    /// left in place.
    pub fn render(&self, id: &str, vars: &[(&str, &str)]) -> Result<String> {
        let mut out = self.get(id)?.to_string();
        for (key, value) in vars {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        Ok(out)
    }
}
