use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_probs, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    /// The hosted model before any fine-tuning.
    Base,
    /// A model produced by a fine-tune job.
    FineTuned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub provider: String,
    pub model: String,
    pub role: ModelRole,
    pub supports_probabilities: bool,
    pub supports_finetune: bool,
}

impl ModelHandle {
    pub fn require_probabilities(&self) -> Result<()> {
        if self.supports_probabilities {
            Ok(())
        } else {
            Err(Error::Capability(format!(
                "model {} on provider {} does not expose class probabilities",
                self.model, self.provider
            )))
        }
    }
}

/// Decoded model answer: one of the labels, or no recognisable label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Decoded {
    Label(Label),
    Invalid,
}

impl Decoded {
    pub fn label(self) -> Option<Label> {
        match self {
            Decoded::Label(l) => Some(l),
            Decoded::Invalid => None,
        }
    }

    pub fn is_invalid(self) -> bool {
        matches!(self, Decoded::Invalid)
    }
}

impl fmt::Display for Decoded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoded::Label(l) => f.write_str(l.as_str()),
            Decoded::Invalid => f.write_str("invalid"),
        }
    }
}

impl From<Decoded> for String {
    fn from(d: Decoded) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Decoded {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s == "invalid" {
            Ok(Decoded::Invalid)
        } else {
            s.parse().map(Decoded::Label)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub decoded: Decoded,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
    pub raw: String,
    pub prompt_hash: String,
}

impl PredictionRecord {
    pub fn check(&self) -> Result<()> {
        if let Some(p) = &self.probs {
            validate_probs(p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub n_shots: usize,
    pub chain_of_thought: bool,
    pub template_id: String,
    pub temperature: f64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            n_shots: 3,
            chain_of_thought: true,
            template_id: "classify_few_shot".into(),
            temperature: 0.0,
        }
    }
}

impl PromptConfig {
    /// Zero-shot, direct-answer prompting used for fine-tuned models.
    pub fn fine_tuned() -> Self {
        Self {
            n_shots: 0,
            chain_of_thought: false,
            template_id: "classify_finetuned".into(),
            temperature: 0.0,
        }
    }

    /// Plain prompt pass-through for free-text generation.
    pub fn generation(temperature: f64) -> Self {
        Self {
            n_shots: 0,
            chain_of_thought: false,
            template_id: "raw".into(),
            temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreDimension {
    Correctness,
    Difficulty,
    Plausibility,
    Fluency,
}

impl ScoreDimension {
    pub const ALL: [ScoreDimension; 4] = [
        ScoreDimension::Correctness,
        ScoreDimension::Difficulty,
        ScoreDimension::Plausibility,
        ScoreDimension::Fluency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreDimension::Correctness => "correctness",
            ScoreDimension::Difficulty => "difficulty",
            ScoreDimension::Plausibility => "plausibility",
            ScoreDimension::Fluency => "fluency",
        }
    }

    pub fn template_id(self) -> String {
        format!("score_{}", self.as_str())
    }
}

/// Per-instance result of scoring: integer 1..=10 per requested dimension, or
/// the dimension whose answer never parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ScoreOutcome {
    Scored {
        scores: BTreeMap<ScoreDimension, u8>,
    },
    Unscorable {
        dimension: ScoreDimension,
        raw: String,
    },
}

impl ScoreOutcome {
    /// Sum over `dims`; `None` when unscorable or a dimension is missing.
    pub fn total(&self, dims: &[ScoreDimension]) -> Option<u32> {
        match self {
            ScoreOutcome::Scored { scores } => dims
                .iter()
                .map(|d| scores.get(d).map(|&s| u32::from(s)))
                .sum(),
            ScoreOutcome::Unscorable { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoded_serde() {
        assert_eq!(
            serde_json::to_string(&Decoded::Invalid).unwrap(),
            "\"invalid\""
        );
        let d: Decoded = serde_json::from_str("\"neutral\"").unwrap();
        assert_eq!(d, Decoded::Label(Label::Neutral));
        assert!(serde_json::from_str::<Decoded>("\"maybe\"").is_err());
    }

    #[test]
    fn score_totals() {
        let s = ScoreOutcome::Scored {
            scores: [
                (ScoreDimension::Correctness, 4),
                (ScoreDimension::Difficulty, 6),
            ]
            .into(),
        };
        assert_eq!(
            s.total(&[ScoreDimension::Correctness, ScoreDimension::Difficulty]),
            Some(10)
        );
        assert_eq!(s.total(&[ScoreDimension::Fluency]), None);
    }

    #[test]
    fn capability_gate() {
        let h = ModelHandle {
            provider: "p".into(),
            model: "m".into(),
            role: ModelRole::Base,
            supports_probabilities: false,
            supports_finetune: true,
        };
        assert!(matches!(
            h.require_probabilities(),
            Err(Error::Capability(_))
        ));
    }
}
