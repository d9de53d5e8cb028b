use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Label};
use crate::error::{Error, Result};
use crate::modelgate::{Decoded, PredictionRecord};

/// Meta key marking an instance whose gold label lives in the two-way
/// entailment / non-entailment space.
pub const META_LABEL_SPACE: &str = "label_space";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    ThreeWay,
    /// Entailment against everything else.
    Binary,
    /// Binary for instances tagged `label_space = binary`, three-way otherwise.
    #[default]
    Auto,
}

/// Per-instance correctness of one system on one dataset for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub system: String,
    pub seed: u64,
    pub dataset: String,
    /// One entry per dataset instance, in dataset order: 1 correct, 0 not.
    pub correct: Vec<u8>,
    pub accuracy: f64,
}

impl RunResult {
    pub fn new(
        system: impl Into<String>,
        seed: u64,
        dataset: impl Into<String>,
        correct: Vec<u8>,
    ) -> Result<Self> {
        if correct.iter().any(|&b| b > 1) {
            return Err(Error::Validation("correctness bits must be 0 or 1".into()));
        }
        let accuracy = if correct.is_empty() {
            0.0
        } else {
            correct.iter().map(|&b| f64::from(b)).sum::<f64>() / correct.len() as f64
        };
        Ok(Self {
            system: system.into(),
            seed,
            dataset: dataset.into(),
            correct,
            accuracy,
        })
    }
}

fn is_correct(gold: Label, decoded: Decoded, binary: bool) -> bool {
    match decoded {
        Decoded::Invalid => false,
        Decoded::Label(pred) if binary => {
            (pred == Label::Entailment) == (gold == Label::Entailment)
        }
        Decoded::Label(pred) => pred == gold,
    }
}

/// Scores predictions against the gold labels of `dataset`. An undecodable
/// prediction counts as wrong.
pub fn score(
    system: &str,
    seed: u64,
    dataset: &Dataset,
    predictions: &[PredictionRecord],
    mode: ScoreMode,
) -> Result<RunResult> {
    let index: HashMap<&str, &PredictionRecord> = predictions
        .iter()
        .map(|p| (p.instance_id.as_str(), p))
        .collect();
    let missing: Vec<String> = dataset
        .instances
        .iter()
        .filter(|i| !index.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut bits = Vec::with_capacity(dataset.len());
    for inst in &dataset.instances {
        let gold = inst.label.ok_or_else(|| {
            Error::Validation(format!("evaluation instance {} has no gold label", inst.id))
        })?;
        let binary = match mode {
            ScoreMode::ThreeWay => false,
            ScoreMode::Binary => true,
            ScoreMode::Auto => {
                inst.meta.get(META_LABEL_SPACE).map(String::as_str) == Some("binary")
            }
        };
        bits.push(u8::from(is_correct(
            gold,
            index[inst.id.as_str()].decoded,
            binary,
        )));
    }
    RunResult::new(system, seed, &dataset.name, bits)
}
